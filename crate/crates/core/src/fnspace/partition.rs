use super::FnSpaceError;

#[derive(Debug, Clone, PartialEq)]
pub enum PartitionKind {
    General,
    Chebyshev {
        eta: usize,
    },
    /// Inflection set `Y_s`; nodes are the interior points `1 > y_1 > ... > y_s > -1`.
    Inflection,
}

/// A finite set of points in `[-1, 1]`.
///
/// General and Chebyshev partitions store `-1 = t_0 < ... < t_n = 1` in
/// increasing order. Inflection sets store only their interior points in
/// decreasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSet {
    nodes: Vec<f64>,
    kind: PartitionKind,
}

/// `t_j = -cos(jπ/η)` for `0 <= j <= η`, `-1` for `j < 0` and `1` for `j > η`.
///
/// Evaluated as `sin((2j - η)π / (2η))`, which is the same number but exactly
/// antisymmetric and exactly zero at the midpoint.
pub fn chebyshev_knot(eta: usize, j: i64) -> f64 {
    if j <= 0 {
        return -1.0;
    }
    if j >= eta as i64 {
        return 1.0;
    }
    let e = eta as f64;
    ((2.0 * j as f64 - e) * std::f64::consts::PI / (2.0 * e)).sin()
}

/// The Chebyshev partition `T_η`.
pub fn chebyshev_partition(eta: usize) -> Result<PartitionSet, FnSpaceError> {
    if eta == 0 {
        return Err(FnSpaceError::InvalidPartition("eta must be at least 1".into()));
    }
    let nodes = (0..=eta as i64).map(|j| chebyshev_knot(eta, j)).collect();
    Ok(PartitionSet { nodes, kind: PartitionKind::Chebyshev { eta } })
}

impl PartitionSet {
    /// General partition; nodes must increase strictly from -1 to 1.
    pub fn general(nodes: Vec<f64>) -> Result<Self, FnSpaceError> {
        if nodes.len() < 2 {
            return Err(FnSpaceError::InvalidPartition("need at least the two endpoints".into()));
        }
        if nodes[0] != -1.0 || *nodes.last().unwrap() != 1.0 {
            return Err(FnSpaceError::InvalidPartition("first node must be -1 and last node 1".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(FnSpaceError::InvalidPartition("nodes must be strictly increasing".into()));
        }
        Ok(PartitionSet { nodes, kind: PartitionKind::General })
    }

    /// `n` equal cells.
    pub fn uniform(cells: usize) -> Result<Self, FnSpaceError> {
        if cells == 0 {
            return Err(FnSpaceError::InvalidPartition("need at least one cell".into()));
        }
        let mut nodes: Vec<f64> = (0..=cells).map(|j| -1.0 + 2.0 * j as f64 / cells as f64).collect();
        nodes[cells] = 1.0;
        Self::general(nodes)
    }

    pub fn chebyshev(eta: usize) -> Result<Self, FnSpaceError> {
        chebyshev_partition(eta)
    }

    /// Inflection set from interior points in any order; duplicates and
    /// points outside `(-1, 1)` are rejected.
    pub fn inflection(mut points: Vec<f64>) -> Result<Self, FnSpaceError> {
        if points.iter().any(|y| !(y.abs() < 1.0)) {
            return Err(FnSpaceError::InvalidPartition("inflection points must lie in (-1, 1)".into()));
        }
        points.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if points.windows(2).any(|w| w[0] == w[1]) {
            return Err(FnSpaceError::InvalidPartition("inflection points must be distinct".into()));
        }
        Ok(PartitionSet { nodes: points, kind: PartitionKind::Inflection })
    }

    pub fn kind(&self) -> &PartitionKind {
        &self.kind
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of cells of a general or Chebyshev partition.
    pub fn cells(&self) -> usize {
        match self.kind {
            PartitionKind::Inflection => self.nodes.len() + 1,
            _ => self.nodes.len() - 1,
        }
    }

    /// Augmented sequence: for inflection sets `1 = y_0 > y_1 > ... > y_{s+1} = -1`,
    /// otherwise the stored nodes.
    pub fn augmented(&self) -> Vec<f64> {
        match self.kind {
            PartitionKind::Inflection => {
                let mut v = Vec::with_capacity(self.nodes.len() + 2);
                v.push(1.0);
                v.extend_from_slice(&self.nodes);
                v.push(-1.0);
                v
            }
            _ => self.nodes.clone(),
        }
    }

    /// Increasing node list including both endpoints.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v = self.augmented();
        if self.kind == PartitionKind::Inflection {
            v.reverse();
        }
        v
    }

    /// `‖T‖ = max_j |t_{j+1} - t_j|`.
    pub fn mesh_norm(&self) -> f64 {
        self.breakpoints().windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
    }

    /// Length of cell `j` of the increasing breakpoint list.
    pub fn gap(&self, j: usize) -> f64 {
        let b = self.breakpoints();
        b[j + 1] - b[j]
    }

    /// Cell `[t_j, t_{j+1}]`.
    pub fn interval(&self, j: usize) -> (f64, f64) {
        let b = self.breakpoints();
        (b[j], b[j + 1])
    }

    /// Interior points `y_1, ..., y_s` of an inflection set (empty otherwise).
    pub fn inflection_points(&self) -> &[f64] {
        match self.kind {
            PartitionKind::Inflection => &self.nodes,
            _ => &[],
        }
    }

    /// Neighbour `x_i^♯ = t_{i+1}` of the increasing breakpoint list.
    pub fn neighbor_right(&self, i: usize) -> Option<f64> {
        self.breakpoints().get(i + 1).copied()
    }

    /// Neighbour `x_i^* = t_{i-2}`.
    pub fn neighbor_left2(&self, i: usize) -> Option<f64> {
        i.checked_sub(2).and_then(|j| self.breakpoints().get(j).copied())
    }

    /// Union of the breakpoints of two partitions.
    pub fn merge(&self, other: &PartitionSet) -> PartitionSet {
        let mut v = self.breakpoints();
        v.extend(other.breakpoints());
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        PartitionSet { nodes: v, kind: PartitionKind::General }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn chebyshev_eta_two_has_exact_midpoint() {
        let t = chebyshev_partition(2).unwrap();
        assert_eq!(t.nodes(), &[-1.0, 0.0, 1.0]);
        assert_eq!(chebyshev_knot(4, -3), -1.0);
        assert!(chebyshev_partition(0).is_err());
    }

    #[test]
    fn inflection_augmentation() {
        let y = PartitionSet::inflection(vec![-0.2, 0.5]).unwrap();
        assert_eq!(y.augmented(), vec![1.0, 0.5, -0.2, -1.0]);
        assert_eq!(y.inflection_points(), &[0.5, -0.2]);
        assert!(PartitionSet::inflection(vec![0.1, 0.1]).is_err());
        assert!(PartitionSet::inflection(vec![1.0]).is_err());
        let empty = PartitionSet::inflection(vec![]).unwrap();
        assert_eq!(empty.augmented(), vec![1.0, -1.0]);
    }

    #[test]
    fn general_validation_and_neighbors() {
        assert!(PartitionSet::general(vec![-1.0, 0.3, 0.2, 1.0]).is_err());
        let p = PartitionSet::general(vec![-1.0, -0.5, 0.2, 1.0]).unwrap();
        assert_eq!(p.neighbor_right(1), Some(0.2));
        assert_eq!(p.neighbor_left2(3), Some(-0.5));
        assert_eq!(p.neighbor_left2(1), None);
        assert!((p.mesh_norm() - 0.8).abs() < 1e-15);
        let m = p.merge(&chebyshev_partition(2).unwrap());
        assert_eq!(m.nodes(), &[-1.0, -0.5, 0.0, 0.2, 1.0]);
    }

    proptest! {
        #[test]
        fn chebyshev_nodes_are_symmetric_and_increasing(eta in 1usize..200) {
            let t = chebyshev_partition(eta).unwrap();
            let n = t.nodes();
            prop_assert_eq!(n.len(), eta + 1);
            prop_assert_eq!(n[0], -1.0);
            prop_assert_eq!(n[eta], 1.0);
            for j in 0..=eta {
                prop_assert_eq!(n[j], -n[eta - j]);
            }
            prop_assert!(n.windows(2).all(|w| w[1] > w[0]));
            prop_assert!(t.mesh_norm() <= std::f64::consts::PI / eta as f64 + 1e-15);
        }
    }
}
