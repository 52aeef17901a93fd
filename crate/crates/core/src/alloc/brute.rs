use super::{AllocationDecision, EdgeWeightMatrix};
use crate::error::{Error, Result};

/// Largest side accepted by [`brute_force_assign`].
pub const BRUTE_FORCE_LIMIT: usize = 8;

/// Exhaustive search over every injective partial user→RB map. Test oracle for
/// the Hungarian solver; refuses instances larger than 8×8.
pub fn brute_force_assign(matrix: &EdgeWeightMatrix) -> Result<AllocationDecision> {
    let (users, rbs) = (matrix.users(), matrix.rbs());
    if users > BRUTE_FORCE_LIMIT || rbs > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge { users, rbs });
    }
    let mut search = Search {
        matrix,
        used: vec![false; rbs],
        current: vec![None; users],
        best: vec![None; users],
        best_value: f64::INFINITY,
    };
    search.descend(0, matrix.total_samples() as f64);
    Ok(matrix.decision_from_matching(&search.best))
}

struct Search<'a> {
    matrix: &'a EdgeWeightMatrix,
    used: Vec<bool>,
    current: Vec<Option<usize>>,
    best: Vec<Option<usize>>,
    best_value: f64,
}

impl Search<'_> {
    // Accumulates in user order, matching `decision_from_matching`.
    fn descend(&mut self, user: usize, value: f64) {
        if user == self.matrix.users() {
            if value < self.best_value {
                self.best_value = value;
                self.best.clone_from(&self.current);
            }
            return;
        }
        self.current[user] = None;
        self.descend(user + 1, value);
        for rb in 0..self.matrix.rbs() {
            if self.used[rb] {
                continue;
            }
            let w = self.matrix.weight(user, rb);
            let next = if w < 0.0 { value + w } else { value };
            self.used[rb] = true;
            self.current[user] = Some(rb);
            self.descend(user + 1, next);
            self.used[rb] = false;
        }
        self.current[user] = None;
    }
}
