//! Exact squared Euclidean distance transform (separable lower-envelope
//! method), with per-axis weights so distances can be measured either in
//! voxel units or in millimetres.

/// Squared distance from every voxel to the nearest feature voxel, where the
/// distance between voxel centres is `sqrt(Σ (w_a · Δ_a)²)`. Voxels with no
/// feature anywhere in the block get `f64::INFINITY`.
pub fn squared_edt(feature: &[bool], dims: [usize; 3], weights: [f64; 3]) -> Vec<f64> {
    let n = dims[0] * dims[1] * dims[2];
    assert_eq!(feature.len(), n);
    let mut d: Vec<f64> = feature.iter().map(|&f| if f { 0.0 } else { f64::INFINITY }).collect();
    let longest = *dims.iter().max().unwrap();
    let mut scratch = Scratch::new(longest);
    let strides = [1, dims[0], dims[0] * dims[1]];
    for axis in 0..3 {
        let len = dims[axis];
        if len == 1 {
            continue;
        }
        let stride = strides[axis];
        let w2 = weights[axis] * weights[axis];
        let (oa, ob) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        for b in 0..dims[ob] {
            for a in 0..dims[oa] {
                let base = a * strides[oa] + b * strides[ob];
                for k in 0..len {
                    scratch.f[k] = d[base + k * stride];
                }
                scratch.transform(len, w2);
                for k in 0..len {
                    d[base + k * stride] = scratch.out[k];
                }
            }
        }
    }
    d
}

struct Scratch {
    f: Vec<f64>,
    out: Vec<f64>,
    v: Vec<usize>,
    z: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch {
            f: vec![0.0; n],
            out: vec![0.0; n],
            v: vec![0; n],
            z: vec![0.0; n + 1],
        }
    }

    /// out[p] = min_q f[q] + w2 (p - q)².
    fn transform(&mut self, n: usize, w2: f64) {
        let f = &self.f;
        let mut k: isize = -1;
        for q in 0..n {
            if !f[q].is_finite() {
                continue;
            }
            let fq = f[q] + w2 * (q * q) as f64;
            loop {
                if k < 0 {
                    k = 0;
                    self.v[0] = q;
                    self.z[0] = f64::NEG_INFINITY;
                    self.z[1] = f64::INFINITY;
                    break;
                }
                let vk = self.v[k as usize];
                let fv = f[vk] + w2 * (vk * vk) as f64;
                let s = (fq - fv) / (2.0 * w2 * (q - vk) as f64);
                if s <= self.z[k as usize] {
                    k -= 1;
                    continue;
                }
                k += 1;
                self.v[k as usize] = q;
                self.z[k as usize] = s;
                self.z[k as usize + 1] = f64::INFINITY;
                break;
            }
        }
        if k < 0 {
            self.out[..n].fill(f64::INFINITY);
            return;
        }
        let mut j = 0usize;
        for p in 0..n {
            while self.z[j + 1] < p as f64 {
                j += 1;
            }
            let q = self.v[j];
            let dq = p as f64 - q as f64;
            self.out[p] = w2 * dq * dq + f[q];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(feature: &[bool], dims: [usize; 3], w: [f64; 3]) -> Vec<f64> {
        let coords = |i: usize| [i % dims[0], (i / dims[0]) % dims[1], i / (dims[0] * dims[1])];
        (0..feature.len())
            .map(|i| {
                let p = coords(i);
                (0..feature.len())
                    .filter(|&j| feature[j])
                    .map(|j| {
                        let q = coords(j);
                        (0..3)
                            .map(|a| {
                                let d = w[a] * (p[a] as f64 - q[a] as f64);
                                d * d
                            })
                            .sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    #[test]
    fn matches_brute_force_on_pseudo_random_blocks() {
        let mut state = 0x2545_f491_4f6c_dd1du64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for trial in 0..20 {
            let dims = [1 + (next() % 7) as usize, 1 + (next() % 6) as usize, 1 + (next() % 5) as usize];
            let n = dims.iter().product::<usize>();
            let density = 1 + trial % 5;
            let feature: Vec<bool> = (0..n).map(|_| next() % 10 < density as u64).collect();
            let w = [0.7, 1.3, 2.1];
            let fast = squared_edt(&feature, dims, w);
            let slow = brute(&feature, dims, w);
            for (a, b) in fast.iter().zip(&slow) {
                if b.is_infinite() {
                    assert!(a.is_infinite());
                } else {
                    assert!((a - b).abs() < 1e-9, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn empty_feature_is_infinite() {
        let d = squared_edt(&[false; 8], [2, 2, 2], [1.0; 3]);
        assert!(d.iter().all(|v| v.is_infinite()));
    }
}
