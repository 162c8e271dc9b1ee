use serde::{Deserialize, Serialize};

/// One type index per player, `(theta_1, ..., theta_N)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JointType(pub Vec<usize>);

impl JointType {
    pub fn of(&self, player: usize) -> usize {
        self.0[player]
    }
}

/// Mixed-radix indexing of joint types and of opponent-type tuples.
///
/// Player 0 is the most significant digit. For player `i` the opponent
/// tuple `theta_{-i}` enumerates players `j != i` in increasing order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeSpace {
    sizes: Vec<usize>,
}

impl TypeSpace {
    pub fn new(sizes: Vec<usize>) -> Self {
        assert!(sizes.iter().all(|&s| s > 0), "every player needs at least one type");
        TypeSpace { sizes }
    }

    pub fn num_players(&self) -> usize {
        self.sizes.len()
    }

    pub fn num_types(&self, player: usize) -> usize {
        self.sizes[player]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn joint_count(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn joint_index(&self, theta: &JointType) -> usize {
        theta.0.iter().zip(&self.sizes).fold(0, |acc, (&t, &s)| acc * s + t)
    }

    pub fn joint_from_index(&self, mut idx: usize) -> JointType {
        let mut out = vec![0; self.sizes.len()];
        for (slot, &s) in out.iter_mut().zip(&self.sizes).rev() {
            *slot = idx % s;
            idx /= s;
        }
        JointType(out)
    }

    pub fn joint_types(&self) -> impl Iterator<Item = JointType> + '_ {
        (0..self.joint_count()).map(|i| self.joint_from_index(i))
    }

    /// Number of opponent tuples `|Theta_{-i}|`.
    pub fn opponent_count(&self, player: usize) -> usize {
        self.sizes
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != player)
            .map(|(_, &s)| s)
            .product()
    }

    /// Index of `theta_{-i}` within `Theta_{-i}`; `theta_i` is ignored.
    pub fn opponent_index(&self, player: usize, theta: &JointType) -> usize {
        self.sizes
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != player)
            .fold(0, |acc, (j, &s)| acc * s + theta.0[j])
    }

    /// Joint type formed from player `i`'s own type and an opponent index.
    pub fn with_opponents(&self, player: usize, own: usize, mut opp_idx: usize) -> JointType {
        let mut out = vec![0; self.sizes.len()];
        for j in (0..self.sizes.len()).rev() {
            if j == player {
                out[j] = own;
            } else {
                out[j] = opp_idx % self.sizes[j];
                opp_idx /= self.sizes[j];
            }
        }
        JointType(out)
    }
}
