use crate::config::Connectivity;
use crate::volume::{BinaryMask, Grid};

/// Dense component ids (0 = background, 1..=k in raster order of each
/// component's first voxel) with per-component voxel counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentLabeling {
    grid: Grid,
    labels: Vec<u32>,
    sizes: Vec<usize>,
}

impl ComponentLabeling {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Voxel count of component `id` (1-based).
    pub fn size(&self, id: u32) -> usize {
        self.sizes[id as usize - 1]
    }

    /// Sizes indexed by `id - 1`.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Mask of the components for which `keep(id, size)` holds.
    pub fn select(&self, keep: impl Fn(u32, usize) -> bool) -> BinaryMask {
        let kept: Vec<bool> = std::iter::once(false)
            .chain(self.sizes.iter().enumerate().map(|(i, &s)| keep(i as u32 + 1, s)))
            .collect();
        let bits = self.labels.iter().map(|&l| kept[l as usize]).collect();
        BinaryMask::from_bits(self.grid, bits).expect("same grid")
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

fn union(parent: &mut [u32], a: u32, b: u32) -> u32 {
    let ra = find(parent, a);
    let rb = find(parent, b);
    if ra == rb {
        return ra;
    }
    let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
    parent[hi as usize] = lo;
    lo
}

/// Two-pass union-find labeling.
pub fn connected_components(m: &BinaryMask, conn: Connectivity) -> ComponentLabeling {
    let grid = *m.grid();
    let [nx, ny, nz] = grid.dims;
    let sy = nx as isize;
    let sz = (nx * ny) as isize;

    let all = conn.offsets();
    let backward: Vec<[i64; 3]> = all
        .iter()
        .copied()
        .filter(|o| o[2] < 0 || (o[2] == 0 && (o[1] < 0 || (o[1] == 0 && o[0] < 0))))
        .collect();
    let is_backward = |o: [i64; 3]| backward.contains(&o);
    // When the x-1 neighbour is set, any backward neighbour that is also a
    // backward neighbour of x-1 has already been merged with it.
    let after_left: Vec<[i64; 3]> = backward
        .iter()
        .copied()
        .filter(|&o| o != [-1, 0, 0] && !is_backward([o[0] + 1, o[1], o[2]]))
        .collect();
    let left_set = backward.contains(&[-1, 0, 0]);

    let bits = m.bits();
    let mut labels = vec![0u32; grid.len()];
    let mut parent: Vec<u32> = vec![0];

    for z in 0..nz {
        for y in 0..ny {
            let row = (z * ny + y) * nx;
            for x in 0..nx {
                let i = row + x;
                if !bits[i] {
                    continue;
                }
                let mut current = 0u32;
                let use_left = left_set && x > 0 && bits[i - 1];
                let candidates = if use_left {
                    current = labels[i - 1];
                    &after_left
                } else {
                    &backward
                };
                for o in candidates {
                    let (px, py, pz) = (x as i64 + o[0], y as i64 + o[1], z as i64 + o[2]);
                    if px < 0 || py < 0 || pz < 0 || px >= nx as i64 || py >= ny as i64 {
                        continue;
                    }
                    let j = (i as isize + o[0] as isize + o[1] as isize * sy + o[2] as isize * sz) as usize;
                    if bits[j] {
                        let lj = labels[j];
                        current = if current == 0 { lj } else { union(&mut parent, current, lj) };
                    }
                }
                if current == 0 {
                    current = parent.len() as u32;
                    parent.push(current);
                }
                labels[i] = current;
            }
        }
    }

    let mut dense = vec![0u32; parent.len()];
    let mut sizes = Vec::new();
    for l in labels.iter_mut() {
        if *l == 0 {
            continue;
        }
        let root = find(&mut parent, *l) as usize;
        if dense[root] == 0 {
            sizes.push(0);
            dense[root] = sizes.len() as u32;
        }
        *l = dense[root];
        sizes[*l as usize - 1] += 1;
    }
    ComponentLabeling { grid, labels, sizes }
}
