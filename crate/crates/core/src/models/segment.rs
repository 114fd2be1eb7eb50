use super::assembly::{Model, ModelBuilder, PixelConstraint, Side, TermKind};
use super::{near_binarity, threshold_labels, SegConfig, Variant};
use crate::features::AssignmentOperator;
use crate::ot::{CostMatrix, Histogram};
use crate::pd::{build_preconditioner, solve, Monitor, SegProblem, SolveOptions, SolveReport, Steps};
use crate::{Error, Result};

/// Image side of a segmentation problem. Phase `k` uses `priors[k]`; the
/// cost runs from prior bins (rows) to image bins (columns) and may be
/// rectangular when the priors come from another codebook.
#[derive(Clone, Copy, Debug)]
pub struct SegInput<'a> {
    pub assignment: &'a AssignmentOperator,
    pub priors: &'a [Histogram],
    pub cost: Option<&'a CostMatrix>,
}

#[derive(Clone, Debug)]
pub struct SegResult {
    pub width: usize,
    pub height: usize,
    /// Two-phase: one map, the probability of phase 1. Multi-phase: one map
    /// per phase.
    pub maps: Vec<Vec<f64>>,
    /// Phase index per pixel.
    pub labels: Vec<u8>,
    pub energy: Option<f64>,
    pub near_binarity: f64,
    pub report: SolveReport,
}

/// Dissimilarity term between histograms of length `rows` and `cols`;
/// `n` caps the mass seen by the Sinkhorn conjugate.
pub(crate) fn data_term(
    variant: Variant,
    lambda: f64,
    mk_exact_max_bins: usize,
    cost: Option<&CostMatrix>,
    (rows, cols): (usize, usize),
    n: f64,
) -> Result<TermKind> {
    let cost = || {
        let c = cost.ok_or_else(|| Error::InvalidParameter(format!("variant {variant} needs a cost matrix")))?;
        if c.rows() != rows || c.cols() != cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} cost for histograms on {rows} and {cols} bins",
                c.rows(),
                c.cols()
            )));
        }
        Ok(c.clone())
    };
    Ok(match variant {
        Variant::L1 => {
            if rows != cols {
                return Err(Error::InvalidParameter(
                    "l1 needs histograms on a shared codebook; use a transport variant for foreign codebooks".into(),
                ));
            }
            TermKind::L1
        }
        Variant::MkExact => {
            let c = cost()?;
            if rows.max(cols) > mk_exact_max_bins {
                return Err(Error::TooLarge(format!(
                    "mk_exact stores {rows}x{cols} plans per term (cap {mk_exact_max_bins} bins); use sinkhorn_grad or sinkhorn_prox"
                )));
            }
            TermKind::MkExact(c)
        }
        Variant::SinkhornProx => TermKind::SinkhornProx { cost: cost()?, lambda, n },
        Variant::SinkhornGrad => TermKind::SinkhornGrad { cost: cost()?, lambda, n },
    })
}

fn term_kind(input: &SegInput, config: &SegConfig) -> Result<TermKind> {
    let op = input.assignment;
    let rows = input.priors[0].len();
    if input.priors.iter().any(|p| p.len() != rows) {
        return Err(Error::DimensionMismatch("priors have different lengths".into()));
    }
    data_term(config.variant, config.lambda, config.mk_exact_max_bins, input.cost, (rows, op.bins), op.pixels() as f64)
}

fn check_priors(input: &SegInput, k: usize) -> Result<()> {
    if input.priors.len() != k {
        return Err(Error::InvalidParameter(format!("expected {k} priors, got {}", input.priors.len())));
    }
    for (i, p) in input.priors.iter().enumerate() {
        if (p.total_mass() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("prior {i} is not normalized (mass {})", p.total_mass())));
        }
    }
    Ok(())
}

fn two_phase_model(input: &SegInput, config: &SegConfig) -> Result<Model> {
    config.validate()?;
    check_priors(input, 2)?;
    let kind = term_kind(input, config)?;
    let op = input.assignment;
    let mut b = ModelBuilder::new(PixelConstraint::Box);
    let blk = b.add_block(op, config.rho, 0.0);
    let fg = Side::prior(blk, input.priors[1].as_slice().to_vec());
    let bg = Side::prior(blk, input.priors[0].as_slice().to_vec()).complement(b.blocks());
    let h = Side::assign(blk, op.bins);
    let hc = h.clone().complement(b.blocks());
    b.add_term(kind.clone(), fg, h);
    b.add_term(kind, bg, hc);
    b.build()
}

fn multi_phase_model(input: &SegInput, config: &SegConfig) -> Result<Model> {
    config.validate()?;
    let k = input.priors.len();
    if k < 2 {
        return Err(Error::InvalidParameter("multi-phase segmentation needs at least two priors".into()));
    }
    if k > u8::MAX as usize {
        return Err(Error::InvalidParameter(format!("at most 255 phases are supported, got {k}")));
    }
    check_priors(input, k)?;
    let kind = term_kind(input, config)?;
    let op = input.assignment;
    let mut b = ModelBuilder::new(PixelConstraint::Simplex);
    for prior in input.priors {
        let blk = b.add_block(op, config.rho, 0.0);
        b.add_term(kind.clone(), Side::prior(blk, prior.as_slice().to_vec()), Side::assign(blk, op.bins));
    }
    b.build()
}

pub(crate) fn run_model(
    model: &Model,
    config: &SegConfig,
    monitor: Option<&mut dyn Monitor>,
) -> Result<(Vec<f64>, SolveReport)> {
    let pre = build_preconditioner(model, config.precond_r, config.precond_delta, config.precond_gamma)?;
    let opts = SolveOptions { tol: config.tol, max_iter: config.max_iter, trace_energy: false };
    let out = solve(model, Steps::Diagonal(pre), None, &opts, monitor)?;
    Ok((out.primal, out.report))
}

fn finish(model: &Model, u: &[f64], report: SolveReport, config: &SegConfig, with_energy: bool) -> Result<SegResult> {
    let grid = model.blocks[0].grid;
    let maps = model.maps(u);
    let energy = if with_energy { Some(model.energy(u)?) } else { None };
    let labels = threshold_labels(&maps, config.threshold);
    Ok(SegResult {
        width: grid.width,
        height: grid.height,
        near_binarity: near_binarity(&maps),
        maps,
        labels,
        energy,
        report,
    })
}

/// Two-phase segmentation: `u` is the probability of phase 1, compared to
/// `priors[1]`; its complement is compared to `priors[0]`.
pub fn segment_two_phase(
    input: &SegInput,
    config: &SegConfig,
    with_energy: bool,
    monitor: Option<&mut dyn Monitor>,
) -> Result<SegResult> {
    let model = two_phase_model(input, config)?;
    let (u, report) = run_model(&model, config, monitor)?;
    finish(&model, &u, report, config, with_energy)
}

/// Multi-phase segmentation with one probability map per prior, coupled by
/// a per-pixel simplex constraint.
pub fn segment_multi_phase(
    input: &SegInput,
    config: &SegConfig,
    with_energy: bool,
    monitor: Option<&mut dyn Monitor>,
) -> Result<SegResult> {
    let model = multi_phase_model(input, config)?;
    let (u, report) = run_model(&model, config, monitor)?;
    finish(&model, &u, report, config, with_energy)
}

/// Objective value of inner maps `u` (one map for two priors, otherwise one
/// per prior).
pub fn energy(input: &SegInput, maps: &[Vec<f64>], config: &SegConfig) -> Result<f64> {
    let model = if input.priors.len() == 2 && maps.len() == 1 {
        two_phase_model(input, config)?
    } else {
        multi_phase_model(input, config)?
    };
    let n = input.assignment.pixels();
    if maps.len() != model.blocks.len() || maps.iter().any(|m| m.len() != n) {
        return Err(Error::DimensionMismatch("maps do not match the model".into()));
    }
    model.energy(&model.embed(maps, None))
}

/// Power-iteration estimate of `‖K‖` for the two-phase model of `input`.
pub fn coupling_norm(input: &SegInput, config: &SegConfig, iters: usize) -> Result<f64> {
    let model = two_phase_model(input, config)?;
    Ok(crate::pd::estimate_opnorm(
        |u, o| model.apply_k(u, o),
        |p, o| model.apply_kt(p, o),
        model.primal_dim(),
        model.dual_dim(),
        iters,
    ))
}
