use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Supine,
    Prone,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
    Other,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanStatus {
    Pending,
    Included,
    Excluded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accepted,
    Rejected,
}

/// Why a scan left the dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExclusionReason {
    DimsTooFewSlices,
    DimsTooManySlices,
    DimsInPlaneTooSmall,
    DisruptedFormat,
    SeedNotFound,
    VolumeTooSmall,
    VolumeTooLarge,
    ExpertRejected,
}

impl ExclusionReason {
    pub const ALL: [ExclusionReason; 8] = [
        ExclusionReason::DimsTooFewSlices,
        ExclusionReason::DimsTooManySlices,
        ExclusionReason::DimsInPlaneTooSmall,
        ExclusionReason::DisruptedFormat,
        ExclusionReason::SeedNotFound,
        ExclusionReason::VolumeTooSmall,
        ExclusionReason::VolumeTooLarge,
        ExclusionReason::ExpertRejected,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExclusionReason::DimsTooFewSlices => "DimsTooFewSlices",
            ExclusionReason::DimsTooManySlices => "DimsTooManySlices",
            ExclusionReason::DimsInPlaneTooSmall => "DimsInPlaneTooSmall",
            ExclusionReason::DisruptedFormat => "DisruptedFormat",
            ExclusionReason::SeedNotFound => "SeedNotFound",
            ExclusionReason::VolumeTooSmall => "VolumeTooSmall",
            ExclusionReason::VolumeTooLarge => "VolumeTooLarge",
            ExclusionReason::ExpertRejected => "ExpertRejected",
        }
    }
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Exclusion emitted by a pipeline stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExclusionRecord {
    pub scan_id: String,
    pub reason: ExclusionReason,
    pub detail: String,
}

impl ExclusionRecord {
    pub fn new(scan_id: impl Into<String>, reason: ExclusionReason, detail: impl Into<String>) -> Self {
        ExclusionRecord {
            scan_id: scan_id.into(),
            reason,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScanPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fluid: Option<PathBuf>,
}

/// Per-scan metadata and dataset status.
///
/// `status == Excluded` exactly when `exclusion_reason` is present. A verdict
/// is only recorded on a scan that was included when the expert judged it; a
/// rejection then moves the scan to `Excluded` with `ExpertRejected`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub scan_id: String,
    pub position: Option<Position>,
    pub gender: Option<Gender>,
    pub age: Option<u32>,
    pub status: ScanStatus,
    pub exclusion_reason: Option<ExclusionReason>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub exclusion_detail: String,
    pub verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
    #[serde(default)]
    pub paths: ScanPaths,
}

impl ScanRecord {
    pub fn pending(scan_id: impl Into<String>) -> Self {
        ScanRecord {
            scan_id: scan_id.into(),
            position: None,
            gender: None,
            age: None,
            status: ScanStatus::Pending,
            exclusion_reason: None,
            exclusion_detail: String::new(),
            verdict: None,
            note: String::new(),
            paths: ScanPaths::default(),
        }
    }

    pub fn with_demographics(mut self, position: Option<Position>, gender: Option<Gender>, age: Option<u32>) -> Self {
        self.position = position;
        self.gender = gender;
        self.age = age;
        self
    }

    pub fn include(&mut self) {
        self.status = ScanStatus::Included;
        self.exclusion_reason = None;
        self.exclusion_detail.clear();
    }

    pub fn exclude(&mut self, reason: ExclusionReason, detail: impl Into<String>) {
        self.status = ScanStatus::Excluded;
        self.exclusion_reason = Some(reason);
        self.exclusion_detail = detail.into();
    }

    pub fn is_included(&self) -> bool {
        self.status == ScanStatus::Included
    }

    /// Checks the status/reason/verdict coupling.
    pub fn is_consistent(&self) -> bool {
        let excluded = self.status == ScanStatus::Excluded;
        if excluded != self.exclusion_reason.is_some() {
            return false;
        }
        match self.verdict {
            None => true,
            Some(Verdict::Accepted) => self.status == ScanStatus::Included,
            Some(Verdict::Rejected) => self.exclusion_reason == Some(ExclusionReason::ExpertRejected),
        }
    }
}
