//! Inner solver: projection gradient descent on the augmented Lagrangian of
//! the continuous max-flow problem, at fixed capacities.
//!
//! One iteration updates, in order: the spatial flow (gradient step plus
//! pointwise Euclidean projection onto |p| <= C), the sink flow, the source
//! flow, and the conservation multiplier. The residual is the flow
//! conservation error div p - p_s + p_t; iteration stops when its sup norm
//! drops to `tol` or `max_iters` is reached.

use thiserror::Error;

use crate::capacity::CapacityFields;
use crate::grid::{divergence, gradient, ScalarField, VectorField};

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("numerical divergence: {field} became non-finite at inner iteration {iteration} (try a smaller gamma)")]
    NumericalDivergence { field: &'static str, iteration: usize },
}

impl SolverError {
    fn at_iteration(self, iteration: usize) -> SolverError {
        match self {
            SolverError::NumericalDivergence { field, .. } => {
                SolverError::NumericalDivergence { field, iteration }
            }
        }
    }
}

/// How the source flow update is computed.
///
/// `Derived` uses the stationary point of the augmented Lagrangian in p_s,
/// p_s = div p + p_t + (1 - lambda)/c. `AsPrinted` uses the update
/// G = p_t - lambda + div p / c, p_s = (1 + c G) / (2c) instead; it is kept
/// for fidelity experiments against the derived default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceMode {
    Derived,
    AsPrinted,
}

#[derive(Debug, Clone, Copy)]
pub struct InnerSolverConfig {
    /// Augmented Lagrangian weight, > 0.
    pub c: f64,
    /// Gradient step size; must stay below the 2-D stability bound 1/8.
    pub gamma: f64,
    pub max_iters: usize,
    /// Stop once the sup norm of the conservation residual reaches this.
    pub tol: f64,
    pub source_mode: SourceMode,
    /// Enforce p_s <= C_s after each source update.
    pub clamp_source: bool,
}

impl Default for InnerSolverConfig {
    fn default() -> Self {
        Self {
            c: 0.3,
            gamma: 0.11,
            max_iters: 300,
            tol: 1e-4,
            source_mode: SourceMode::Derived,
            clamp_source: true,
        }
    }
}

impl InnerSolverConfig {
    fn assert_valid(&self) {
        assert!(self.c > 0.0, "c must be positive");
        assert!(self.gamma > 0.0, "gamma must be positive");
        assert!(self.tol > 0.0, "tol must be positive");
    }
}

/// Source flow, sink flow, spatial flow and the conservation multiplier
/// (the relaxed label field).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub p_s: ScalarField,
    pub p_t: ScalarField,
    pub p: VectorField,
    pub lambda: ScalarField,
}

impl FlowState {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            p_s: ScalarField::zeros(height, width),
            p_t: ScalarField::zeros(height, width),
            p: VectorField::zeros(height, width),
            lambda: ScalarField::zeros(height, width),
        }
    }

    pub fn height(&self) -> usize {
        self.lambda.height()
    }

    pub fn width(&self) -> usize {
        self.lambda.width()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerDiagnostics {
    pub iterations_run: usize,
    /// Sup norm of the conservation residual after each iteration.
    pub residual_history: Vec<f64>,
    /// Last computed residual; infinite when no iteration ran.
    pub final_residual: f64,
}

/// One gradient step on the spatial flow followed by pointwise projection
/// onto the Euclidean ball of radius `c_spatial`.
pub fn spatial_flow_step(
    mut state: FlowState,
    c_spatial: f64,
    cfg: &InnerSolverConfig,
) -> Result<FlowState, SolverError> {
    assert!(c_spatial >= 0.0, "spatial capacity must be non-negative");
    let (h, w) = (state.height(), state.width());
    let div_p = divergence(&state.p);
    // Descent direction for p is the gradient of (div p - D), with
    // D = p_s + lambda/c - p_t.
    let mismatch = ScalarField::from_fn(h, w, |i, j| {
        div_p.get(i, j)
            - (state.p_s.get(i, j) + state.lambda.get(i, j) / cfg.c - state.p_t.get(i, j))
    });
    let g = gradient(&mismatch);
    for i in 0..h {
        for j in 0..w {
            let mut py = state.p.y(i, j) - cfg.gamma * g.y(i, j);
            let mut px = state.p.x(i, j) - cfg.gamma * g.x(i, j);
            let norm = (py * py + px * px).sqrt();
            // Projection p * min(1, C/|p|); a zero vector stays put.
            if norm > c_spatial {
                let scale = c_spatial / norm;
                py *= scale;
                px *= scale;
            }
            state.p.set_y(i, j, py);
            state.p.set_x(i, j, px);
        }
    }
    if !state.p.all_finite() {
        return Err(SolverError::NumericalDivergence {
            field: "spatial flow",
            iteration: 0,
        });
    }
    Ok(state)
}

/// Sink update: p_t = min(C_t, p_s + lambda/c - div p), pointwise.
pub fn sink_flow_step(
    mut state: FlowState,
    c_t: &ScalarField,
    cfg: &InnerSolverConfig,
) -> Result<FlowState, SolverError> {
    assert!(c_t.same_shape(&state.lambda), "sink capacity shape mismatch");
    let div_p = divergence(&state.p);
    let (h, w) = (state.height(), state.width());
    for i in 0..h {
        for j in 0..w {
            let unconstrained =
                state.p_s.get(i, j) + state.lambda.get(i, j) / cfg.c - div_p.get(i, j);
            state.p_t.set(i, j, c_t.get(i, j).min(unconstrained));
        }
    }
    if !state.p_t.all_finite() {
        return Err(SolverError::NumericalDivergence {
            field: "sink flow",
            iteration: 0,
        });
    }
    Ok(state)
}

/// Source update, in the mode picked by `cfg.source_mode`, optionally clamped
/// to C_s.
pub fn source_flow_step(
    mut state: FlowState,
    c_s: &ScalarField,
    cfg: &InnerSolverConfig,
) -> Result<FlowState, SolverError> {
    assert!(
        c_s.same_shape(&state.lambda),
        "source capacity shape mismatch"
    );
    let div_p = divergence(&state.p);
    let (h, w) = (state.height(), state.width());
    for i in 0..h {
        for j in 0..w {
            let value = match cfg.source_mode {
                SourceMode::Derived => {
                    div_p.get(i, j) + state.p_t.get(i, j) + (1.0 - state.lambda.get(i, j)) / cfg.c
                }
                SourceMode::AsPrinted => {
                    let g = state.p_t.get(i, j) - state.lambda.get(i, j) + div_p.get(i, j) / cfg.c;
                    (1.0 + cfg.c * g) / (2.0 * cfg.c)
                }
            };
            let value = if cfg.clamp_source {
                value.min(c_s.get(i, j))
            } else {
                value
            };
            state.p_s.set(i, j, value);
        }
    }
    if !state.p_s.all_finite() {
        return Err(SolverError::NumericalDivergence {
            field: "source flow",
            iteration: 0,
        });
    }
    Ok(state)
}

/// Multiplier update lambda <- lambda - c * (div p - p_s + p_t). Returns the
/// sup norm of the conservation residual. Lambda is left unclamped; clamping
/// happens only at final thresholding.
pub fn multiplier_step(mut state: FlowState, cfg: &InnerSolverConfig) -> (FlowState, f64) {
    let div_p = divergence(&state.p);
    let (h, w) = (state.height(), state.width());
    let mut residual: f64 = 0.0;
    for i in 0..h {
        for j in 0..w {
            let eps = div_p.get(i, j) - state.p_s.get(i, j) + state.p_t.get(i, j);
            state.lambda.set(i, j, state.lambda.get(i, j) - cfg.c * eps);
            residual = residual.max(eps.abs());
        }
    }
    (state, residual)
}

/// Run spatial, sink, source and multiplier updates in order until the most
/// recently computed residual reaches `tol` or `max_iters` is hit.
///
/// The stopping rule tests the last computed residual, starting from
/// infinity; an infinite `tol` therefore returns after zero iterations with
/// the state untouched, and the zero residual of a freshly initialized state
/// (p = 0, p_s = p_t) does not suppress the first iteration.
pub fn solve_inner(
    init: FlowState,
    caps: &CapacityFields,
    cfg: &InnerSolverConfig,
) -> Result<(FlowState, InnerDiagnostics), SolverError> {
    cfg.assert_valid();
    assert!(
        caps.c_s.same_shape(&init.lambda) && caps.c_t.same_shape(&init.lambda),
        "capacity shapes must match the flow state"
    );
    let mut state = init;
    let mut residual_history = Vec::new();
    let mut last_residual = f64::INFINITY;
    let mut iteration = 0;
    while iteration < cfg.max_iters && last_residual > cfg.tol {
        state = spatial_flow_step(state, caps.c, cfg).map_err(|e| e.at_iteration(iteration))?;
        state = sink_flow_step(state, &caps.c_t, cfg).map_err(|e| e.at_iteration(iteration))?;
        state = source_flow_step(state, &caps.c_s, cfg).map_err(|e| e.at_iteration(iteration))?;
        let (next, residual) = multiplier_step(state, cfg);
        state = next;
        if !state.lambda.all_finite() || !residual.is_finite() {
            return Err(SolverError::NumericalDivergence {
                field: "multiplier",
                iteration,
            });
        }
        residual_history.push(residual);
        last_residual = residual;
        iteration += 1;
    }
    let diagnostics = InnerDiagnostics {
        iterations_run: iteration,
        final_residual: residual_history.last().copied().unwrap_or(f64::INFINITY),
        residual_history,
    };
    Ok((state, diagnostics))
}
