//! Minimal exact 3D kd-tree for nearest-neighbor queries. Splits cycle
//! through the axes; results are identical to brute force.

#[derive(Debug)]
pub(crate) struct KdTree {
    // Points arranged so that the median of every subrange sits in the middle,
    // forming an implicit balanced tree.
    data: Vec<[f64; 3]>,
}

#[inline]
pub(crate) fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

impl KdTree {
    pub fn build(points: &[[f64; 3]]) -> Self {
        let mut data = points.to_vec();
        build_range(&mut data, 0);
        Self { data }
    }

    /// Squared distance from `q` to its nearest point in the tree.
    pub fn nearest_dist2(&self, q: &[f64; 3]) -> f64 {
        let mut best = f64::INFINITY;
        nearest_range(&self.data, 0, q, &mut best);
        best
    }
}

fn build_range(slice: &mut [[f64; 3]], depth: usize) {
    if slice.len() <= 1 {
        return;
    }
    let axis = depth % 3;
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
    let (left, rest) = slice.split_at_mut(mid);
    build_range(left, depth + 1);
    build_range(&mut rest[1..], depth + 1);
}

fn nearest_range(slice: &[[f64; 3]], depth: usize, q: &[f64; 3], best: &mut f64) {
    if slice.is_empty() {
        return;
    }
    let mid = slice.len() / 2;
    let d = dist2(q, &slice[mid]);
    if d < *best {
        *best = d;
    }
    if slice.len() == 1 {
        return;
    }
    let axis = depth % 3;
    let diff = q[axis] - slice[mid][axis];
    let (near, far) = if diff < 0.0 {
        (&slice[..mid], &slice[mid + 1..])
    } else {
        (&slice[mid + 1..], &slice[..mid])
    };
    nearest_range(near, depth + 1, q, best);
    if diff * diff <= *best {
        nearest_range(far, depth + 1, q, best);
    }
}
