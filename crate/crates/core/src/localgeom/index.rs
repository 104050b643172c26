use rustc_hash::FxHashMap;

use crate::types::{Point3, PointCloud};

/// Default cell edge, matched to the neighborhood and growing radii.
pub const DEFAULT_CELL_SIZE: f64 = 0.05;

type CellKey = [i64; 3];

/// Uniform-grid hash answering exact closed-ball radius queries.
///
/// Points are bucketed by `floor(p / cell)`. A query for radius `r` visits
/// every cell overlapping the axis-aligned box `[q - r, q + r]` and tests each
/// point with `|p - q|² <= r²`.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Point3>,
    cell: f64,
    // cell -> range into `order`
    cells: FxHashMap<CellKey, (u32, u32)>,
    order: Vec<u32>,
}

/// Closed-ball membership shared by the index and its callers.
#[inline]
pub fn within_radius(p: &Point3, q: &Point3, r: f64) -> bool {
    (p - q).norm_squared() <= r * r
}

impl SpatialIndex {
    pub fn build(points: &[Point3], cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite(), "cell size must be positive");
        let mut keyed: Vec<(CellKey, u32)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (cell_of(p, cell), i as u32))
            .collect();
        keyed.sort_unstable();

        let mut cells = FxHashMap::default();
        let mut order = Vec::with_capacity(keyed.len());
        let mut start = 0usize;
        while start < keyed.len() {
            let key = keyed[start].0;
            let mut end = start;
            while end < keyed.len() && keyed[end].0 == key {
                order.push(keyed[end].1);
                end += 1;
            }
            cells.insert(key, (start as u32, end as u32));
            start = end;
        }
        Self {
            points: points.to_vec(),
            cell,
            cells,
            order,
        }
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    /// Calls `f(index)` for every point within the closed ball `|p - q| <= r`.
    pub fn for_each_within(&self, q: &Point3, r: f64, mut f: impl FnMut(usize)) {
        if r < 0.0 || self.points.is_empty() {
            return;
        }
        let lo = cell_of(&Point3::new(q.x - r, q.y - r, q.z - r), self.cell);
        let hi = cell_of(&Point3::new(q.x + r, q.y + r, q.z + r), self.cell);
        let span = (0..3).fold(1i128, |acc, k| acc * (hi[k] - lo[k] + 1) as i128);

        let mut visit = |range: (u32, u32)| {
            for &i in &self.order[range.0 as usize..range.1 as usize] {
                if within_radius(&self.points[i as usize], q, r) {
                    f(i as usize);
                }
            }
        };

        if span > self.cells.len() as i128 {
            // large radius: cheaper to walk the occupied cells
            for (key, &range) in &self.cells {
                if (0..3).all(|k| key[k] >= lo[k] && key[k] <= hi[k]) {
                    visit(range);
                }
            }
            return;
        }
        for ix in lo[0]..=hi[0] {
            for iy in lo[1]..=hi[1] {
                for iz in lo[2]..=hi[2] {
                    if let Some(&range) = self.cells.get(&[ix, iy, iz]) {
                        visit(range);
                    }
                }
            }
        }
    }

    /// Indices of all points within `r` of `q`, ascending.
    pub fn radius_query(&self, q: &Point3, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(q, r, |i| out.push(i));
        out.sort_unstable();
        out
    }

    pub fn count_within(&self, q: &Point3, r: f64) -> usize {
        let mut n = 0;
        self.for_each_within(q, r, |_| n += 1);
        n
    }
}

#[inline]
fn cell_of(p: &Point3, cell: f64) -> CellKey {
    [
        (p.x / cell).floor() as i64,
        (p.y / cell).floor() as i64,
        (p.z / cell).floor() as i64,
    ]
}

/// Index over all points of `cloud` with [`DEFAULT_CELL_SIZE`].
pub fn build_index(cloud: &PointCloud) -> SpatialIndex {
    SpatialIndex::build(cloud.points(), DEFAULT_CELL_SIZE)
}
