//! Decay rates and ground-state repopulation.
//!
//! Ground sublevels decay at γ_p and are refilled by a mixture of uniform
//! redistribution (weight r) and magnetic-dipole (M1) redistribution
//! (weight 1 − r). Excited sublevels decay at Γ into the ground manifold
//! with branching ∝ T^{2/3}, T the normalized optical dipole element.
//! Nothing flows into the excited manifold.

use serde::{Deserialize, Serialize};

use crate::atomic_model::{
    clebsch_gordan, decompose_slot, AtomicConstants, EXCITED_COUNT, GROUND_COUNT, LEVEL_COUNT,
};
use crate::error::ModelError;
use crate::units::{ghz, khz};

pub type GroundTable = [[f64; GROUND_COUNT]; GROUND_COUNT];

/// How the M1 share of the ground relaxation is distributed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum M1Model {
    #[default]
    /// Symmetric CG² kernel, diagonally scaled to be doubly stochastic, so
    /// the uniform ground distribution is stationary without light.
    Balanced,
    /// Σ_q CG² normalized per source row and renormalized by 1 − T²_mm.
    /// Not column-stochastic: shifts the dark-field populations when r < 1.
    RowNormalized { within_manifold: bool },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxationConfig {
    /// Ground decay rate γ_p (rad/s).
    pub gamma_p: f64,
    /// Excited decay rate Γ (rad/s).
    pub gamma: f64,
    /// Uniform share of the ground relaxation.
    pub r: f64,
    #[serde(default)]
    pub m1: M1Model,
}

impl RelaxationConfig {
    pub fn new(gamma_p: f64, gamma: f64, r: f64) -> Result<Self, ModelError> {
        let config = Self {
            gamma_p,
            gamma,
            r,
            m1: M1Model::default(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_m1(mut self, m1: M1Model) -> Self {
        self.m1 = m1;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.gamma_p >= 0.0 && self.gamma_p.is_finite()) {
            return Err(ModelError::InvalidParameter(format!("gamma_p must be >= 0, got {}", self.gamma_p)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(ModelError::InvalidParameter(format!("Gamma must be > 0, got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.r) {
            return Err(ModelError::InvalidParameter(format!("r must lie in [0, 1], got {}", self.r)));
        }
        Ok(())
    }

    /// γ_p^(uni) = r γ_p.
    pub fn gamma_uniform(&self) -> f64 {
        self.r * self.gamma_p
    }

    /// γ_p^(M1) = (1 − r) γ_p.
    pub fn gamma_m1(&self) -> f64 {
        (1.0 - self.r) * self.gamma_p
    }
}

/// Buffer-gas cells with measured relaxation rates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cell {
    /// 0.09 kPa N₂.
    Cell1,
    /// 1.35 kPa N₂.
    Cell2,
    /// 11.5 kPa N₂.
    Cell3,
}

impl Cell {
    pub fn gamma_p_khz(self) -> f64 {
        match self {
            Cell::Cell1 => 24.5,
            Cell::Cell2 => 0.107,
            Cell::Cell3 => 0.081,
        }
    }

    pub fn gamma_ghz(self) -> f64 {
        match self {
            Cell::Cell1 => 0.38,
            Cell::Cell2 => 0.51,
            Cell::Cell3 => 1.69,
        }
    }

    pub fn relaxation(self, r: f64) -> Result<RelaxationConfig, ModelError> {
        RelaxationConfig::new(khz(self.gamma_p_khz()), ghz(self.gamma_ghz()), r)
    }
}

/// Γ_l for all 32 sublevels.
pub fn decay_vector(config: &RelaxationConfig) -> [f64; LEVEL_COUNT] {
    let mut out = [config.gamma; LEVEL_COUNT];
    out[..GROUND_COUNT].fill(config.gamma_p);
    out
}

/// Optical branching and M1 redistribution tables. Rows are sources,
/// columns ground targets.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchingTable {
    /// T²_nl, excited n (reindexed 0..16) to ground l.
    pub optical_t2: GroundTable,
    /// W_nl = T_nl^{2/3} / Σ_k T_nk^{2/3}.
    pub branching: GroundTable,
    /// T̃²_ml for ground m → ground l, zero on the diagonal.
    pub m1: GroundTable,
    pub m1_model: M1Model,
}

impl BranchingTable {
    pub fn new(constants: &AtomicConstants, m1_model: M1Model) -> Result<Self, ModelError> {
        let optical_t2 = optical_t2(constants);
        let mut branching = [[0.0; GROUND_COUNT]; EXCITED_COUNT];
        for (n, row) in optical_t2.iter().enumerate() {
            let weights: Vec<f64> = row.iter().map(|t2| t2.cbrt()).collect();
            let total: f64 = weights.iter().sum();
            for (l, w) in weights.into_iter().enumerate() {
                branching[n][l] = w / total;
            }
        }
        let m1 = match m1_model {
            M1Model::Balanced => m1_balanced()?,
            M1Model::RowNormalized { within_manifold } => m1_row_normalized(within_manifold),
        };
        Ok(Self {
            optical_t2,
            branching,
            m1,
            m1_model,
        })
    }

    pub fn excited_branching(&self) -> &GroundTable {
        &self.branching
    }

    /// K_ml = r/15 + T̃²_ml (1 − r) for l ≠ m, zero on the diagonal.
    pub fn mixing_weights(&self, r: f64) -> GroundTable {
        let mut k = [[0.0; GROUND_COUNT]; GROUND_COUNT];
        for m in 0..GROUND_COUNT {
            for l in 0..GROUND_COUNT {
                if l != m {
                    k[m][l] = r / 15.0 + self.m1[m][l] * (1.0 - r);
                }
            }
        }
        k
    }
}

fn sum_q_cg2(target: usize, source: usize) -> f64 {
    let t = decompose_slot(target);
    let s = decompose_slot(source);
    (-1..=1).map(|q| clebsch_gordan(t.f, t.m, s.f, s.m, q).powi(2)).sum()
}

fn optical_t2(constants: &AtomicConstants) -> GroundTable {
    let mut t2 = [[0.0; GROUND_COUNT]; EXCITED_COUNT];
    for (n, row) in t2.iter_mut().enumerate() {
        let x = decompose_slot(GROUND_COUNT + n);
        for (l, v) in row.iter_mut().enumerate() {
            let g = decompose_slot(l);
            *v = constants.dipole_factor(g.f, x.f).powi(2) * sum_q_cg2(GROUND_COUNT + n, l);
        }
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= total);
    }
    t2
}

fn m1_row_normalized(within_manifold: bool) -> GroundTable {
    let mut t2 = [[0.0; GROUND_COUNT]; GROUND_COUNT];
    for (m, row) in t2.iter_mut().enumerate() {
        let fm = decompose_slot(m).f;
        for (l, v) in row.iter_mut().enumerate() {
            if within_manifold || decompose_slot(l).f != fm {
                *v = sum_q_cg2(l, m);
            }
        }
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= total);
    }
    let mut tilde = [[0.0; GROUND_COUNT]; GROUND_COUNT];
    for m in 0..GROUND_COUNT {
        let keep = 1.0 - t2[m][m];
        for l in 0..GROUND_COUNT {
            if l != m {
                tilde[m][l] = t2[m][l] / keep;
            }
        }
    }
    tilde
}

/// Symmetric M1 kernel Σ_q ⟨F_l m_l|F_m 1 m_m q⟩² / (2F_l + 1), l ≠ m.
pub(crate) fn m1_symmetric_kernel() -> GroundTable {
    let mut b = [[0.0; GROUND_COUNT]; GROUND_COUNT];
    for (m, row) in b.iter_mut().enumerate() {
        for (l, v) in row.iter_mut().enumerate() {
            if l != m {
                *v = sum_q_cg2(l, m) / (2 * decompose_slot(l).f + 1) as f64;
            }
        }
    }
    b
}

fn m1_balanced() -> Result<GroundTable, ModelError> {
    let b = m1_symmetric_kernel();
    // Symmetric Sinkhorn: find x > 0 with x_m Σ_l b_ml x_l = 1.
    let mut x = [1.0; GROUND_COUNT];
    for _ in 0..10_000 {
        let mut worst: f64 = 0.0;
        let mut next = [0.0; GROUND_COUNT];
        for m in 0..GROUND_COUNT {
            let bx: f64 = (0..GROUND_COUNT).map(|l| b[m][l] * x[l]).sum();
            worst = worst.max((x[m] * bx - 1.0).abs());
            next[m] = (x[m] / bx).sqrt();
        }
        if worst < 1e-15 {
            let mut out = [[0.0; GROUND_COUNT]; GROUND_COUNT];
            for m in 0..GROUND_COUNT {
                for l in 0..GROUND_COUNT {
                    out[m][l] = x[m] * b[m][l] * x[l];
                }
                let total: f64 = out[m].iter().sum();
                out[m].iter_mut().for_each(|v| *v /= total);
            }
            return Ok(out);
        }
        x = next;
    }
    Err(ModelError::InvalidParameter(
        "M1 kernel scaling did not converge".to_string(),
    ))
}

/// Influx rates Λ_l from the sublevel populations `populations` (length 32).
/// Zero for excited sublevels.
pub fn source_matrix(
    populations: &[f64],
    config: &RelaxationConfig,
    branching: &BranchingTable,
) -> [f64; LEVEL_COUNT] {
    assert_eq!(populations.len(), LEVEL_COUNT);
    let k = branching.mixing_weights(config.r);
    let mut out = [0.0; LEVEL_COUNT];
    for l in 0..GROUND_COUNT {
        let mut acc = 0.0;
        for m in 0..GROUND_COUNT {
            acc += k[m][l] * config.gamma_p * populations[m];
        }
        for n in 0..EXCITED_COUNT {
            acc += branching.branching[n][l] * config.gamma * populations[GROUND_COUNT + n];
        }
        out[l] = acc;
    }
    out
}
