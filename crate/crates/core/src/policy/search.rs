//! Exhaustive action search, the reference the trained policies are
//! measured against.

use super::train::RewardKind;
use crate::geometry::{ActionGrid, FixationPoint};
use crate::oracle::{Reference, RewardTrace, Scene, SceneOracle};
use crate::{Error, Result};

/// Reward of every first action after `initial`, in cell order.
pub fn first_step_rewards(
    oracle: &dyn SceneOracle,
    scene: &Scene,
    reference: &Reference,
    grid: &ActionGrid,
    initial: FixationPoint,
    alpha: f64,
    ppd: u32,
    kind: RewardKind,
) -> Result<Vec<f64>> {
    let (c0, h0) = reference.score_view(oracle, scene, &[initial], alpha, ppd)?;
    let cells: Vec<usize> = (0..grid.len()).collect();
    crate::par::map_slice(&cells, |&a| {
        let fix = [initial, grid.fixation(a, 1)];
        let (c1, h1) = reference.score_view(oracle, scene, &fix, alpha, ppd)?;
        let t = RewardTrace::new(vec![c0, c1], reference.upper_limit, vec![h0, h1]);
        Ok(kind.of(&t, 1))
    })
    .into_iter()
    .collect()
}

/// Best cumulative reward over all `steps`-long sequences drawn from
/// `candidates` (cells may repeat), with one optimal sequence.
pub fn best_sequence(
    oracle: &dyn SceneOracle,
    scene: &Scene,
    reference: &Reference,
    grid: &ActionGrid,
    initial: FixationPoint,
    candidates: &[usize],
    steps: usize,
    alpha: f64,
    ppd: u32,
    kind: RewardKind,
) -> Result<(Vec<usize>, f64)> {
    if candidates.is_empty() || steps == 0 {
        return Err(Error::domain("search needs candidates and at least one step"));
    }
    let (c0, h0) = reference.score_view(oracle, scene, &[initial], alpha, ppd)?;
    let mut st = Search {
        oracle,
        scene,
        reference,
        grid,
        candidates,
        steps,
        alpha,
        ppd,
        kind,
        fix: vec![initial],
        cs: vec![c0],
        h: vec![h0],
        path: Vec::new(),
        best: (Vec::new(), f64::NEG_INFINITY),
    };
    st.descend(0.0)?;
    Ok(st.best)
}

struct Search<'a> {
    oracle: &'a dyn SceneOracle,
    scene: &'a Scene,
    reference: &'a Reference,
    grid: &'a ActionGrid,
    candidates: &'a [usize],
    steps: usize,
    alpha: f64,
    ppd: u32,
    kind: RewardKind,
    fix: Vec<FixationPoint>,
    cs: Vec<f64>,
    h: Vec<f64>,
    path: Vec<usize>,
    best: (Vec<usize>, f64),
}

impl Search<'_> {
    fn descend(&mut self, total: f64) -> Result<()> {
        let j = self.fix.len();
        if j > self.steps {
            if total > self.best.1 {
                self.best = (self.path.clone(), total);
            }
            return Ok(());
        }
        for &a in self.candidates {
            self.fix.push(self.grid.fixation(a, j));
            let (c, e) = self
                .reference
                .score_view(self.oracle, self.scene, &self.fix, self.alpha, self.ppd)?;
            self.cs.push(c);
            self.h.push(e);
            self.path.push(a);
            let t = RewardTrace::new(self.cs.clone(), self.reference.upper_limit, self.h.clone());
            self.descend(total + self.kind.of(&t, j))?;
            self.path.pop();
            self.h.pop();
            self.cs.pop();
            self.fix.pop();
        }
        Ok(())
    }
}
