use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use xpct_core::linpr::{CtfRegularization, DEFAULT_CTF_NU};
use xpct_core::nlpr::{choose_constraint, ConstraintMode, DEFAULT_T_LOW};
use xpct_core::pipeline::{retrieve_views, InitKind, Method, RetrievalConfig};
use xpct_core::{ContentKind, MaterialModel, RealImage, ScanGeometry, SolverSettings, Termination};

use crate::config::{pick, require, RunConfig};
use crate::error::{CliError, CliResult};
use crate::files::{create_dir, load, save, write_text};
use crate::Common;

#[derive(Args, Clone, Debug)]
pub struct RetrieveArgs {
    #[command(flatten)]
    pub common: Common,
    /// Normalized amplitude stacks, one per distance, nearest first.
    #[arg(long = "input", value_delimiter = ',')]
    inputs: Option<Vec<PathBuf>>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Distances the input stacks must have been recorded at.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    distances_mm: Option<Vec<f64>>,
    /// paganin, ctf, unlpr or cnlpr.
    #[arg(long)]
    method: Option<Method>,
    /// Starting point of unlpr/cnlpr: zero, paganin or ctf.
    #[arg(long)]
    init: Option<InitKind>,
    /// one-alpha, one-gamma or tropt.
    #[arg(long)]
    constraint: Option<ConstraintMode>,
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long)]
    t_low: Option<f64>,
    /// CTF regularization rule weight.
    #[arg(long)]
    nu: Option<f64>,
    /// Constant CTF regularization; replaces the rule.
    #[arg(long, allow_negative_numbers = true)]
    alpha_prime: Option<f64>,
    #[arg(long)]
    paganin_distance_index: Option<usize>,
    #[arg(long)]
    history: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    m_consecutive: Option<usize>,
    #[arg(long)]
    obj_tol_pct: Option<f64>,
    #[arg(long)]
    recon_tol_pct: Option<f64>,
}

/// Stacks recorded at one distance each, merged into `views[n][l]`.
fn load_inputs(paths: &[PathBuf]) -> CliResult<(ScanGeometry, Vec<Vec<RealImage>>)> {
    let mut geometry: Option<ScanGeometry> = None;
    let mut views: Vec<Vec<RealImage>> = Vec::new();
    for path in paths {
        let (header, images) = load(path, &[ContentKind::SqrtNormalized])?;
        let g = header.geometry()?;
        if g.n_distances() != 1 {
            return Err(CliError::validation(format!(
                "{}: expected a single-distance stack, header lists {} distances",
                path.display(),
                g.n_distances()
            )));
        }
        match &mut geometry {
            None => {
                views = images.into_iter().map(|i| vec![i]).collect();
                geometry = Some(g);
            }
            Some(first) => {
                let same = first.wavelength_m == g.wavelength_m
                    && first.pixel_width_m == g.pixel_width_m
                    && (first.n_rows, first.n_cols) == (g.n_rows, g.n_cols)
                    && first.view_angles_rad == g.view_angles_rad;
                if !same {
                    return Err(CliError::validation(format!(
                        "{}: wavelength, pixel size, image shape or view angles differ from the first stack",
                        path.display()
                    )));
                }
                first.distances_m.push(g.distances_m[0]);
                for (view, image) in views.iter_mut().zip(images) {
                    view.push(image);
                }
            }
        }
    }
    let geometry = geometry.ok_or_else(|| CliError::validation("no input stacks"))?;
    geometry.validate()?;
    Ok((geometry, views))
}

pub fn run(args: &RetrieveArgs, config: &RunConfig) -> CliResult<()> {
    let c = &config.retrieve;
    let inputs = require(pick(args.inputs.clone(), &c.inputs), "retrieve.inputs")?;
    let out = require(pick(args.output_dir.clone(), &c.output_dir), "retrieve.output_dir")?;
    let method = require(pick(args.method, &c.method), "retrieve.method")?;
    let (geometry, views) = load_inputs(&inputs)?;

    if let Some(expected) = pick(args.distances_mm.clone(), &c.distances_mm) {
        let found: Vec<f64> = geometry.distances_m.iter().map(|d| d * 1e3).collect();
        let matches = expected.len() == found.len()
            && expected.iter().zip(&found).all(|(e, f)| (e - f).abs() <= 1e-9 * e.abs().max(1.0));
        if !matches {
            return Err(CliError::validation(format!(
                "configured distances {expected:?} mm do not match the stack headers {found:?} mm"
            )));
        }
    }

    let mut rc = RetrievalConfig::new(method, &geometry);
    rc.init = pick(args.init, &c.init).unwrap_or(InitKind::Zero);
    rc.paganin_distance_index = pick(args.paganin_distance_index, &c.paganin_distance_index).unwrap_or(0);
    rc.ctf = match (pick(args.nu, &c.nu), pick(args.alpha_prime, &c.alpha_prime)) {
        (Some(_), Some(_)) => return Err(CliError::validation("give nu or alpha_prime, not both")),
        (_, Some(alpha_prime)) => CtfRegularization::Explicit { alpha_prime },
        (nu, None) => CtfRegularization::FixedRule {
            nu: nu.unwrap_or(DEFAULT_CTF_NU),
        },
    };
    rc.ctf.validate()?;
    rc.material = match (pick(args.delta, &c.delta), pick(args.beta, &c.beta)) {
        (Some(delta), Some(beta)) => Some(MaterialModel::new("material", delta, beta)?),
        (None, None) => None,
        _ => return Err(CliError::validation("delta and beta must be given together")),
    };
    let uses_paganin = method == Method::Paganin
        || (matches!(method, Method::Unlpr | Method::Cnlpr) && rc.init == InitKind::Paganin);
    if (uses_paganin || method == Method::Cnlpr) && rc.material.is_none() {
        return Err(CliError::validation(format!(
            "method {method} with init {} needs --delta and --beta",
            rc.init
        )));
    }
    if method == Method::Cnlpr {
        let mode = pick(args.constraint, &c.constraint).unwrap_or(ConstraintMode::OneAlpha);
        let t_low = pick(args.t_low, &c.t_low).unwrap_or(DEFAULT_T_LOW);
        rc.constraint = Some(choose_constraint(mode, rc.material.as_ref().unwrap(), &geometry, t_low)?);
    }
    let d = SolverSettings::default();
    rc.settings = SolverSettings {
        history: pick(args.history, &c.history).unwrap_or(d.history),
        max_iters: pick(args.max_iters, &c.max_iters).unwrap_or(d.max_iters),
        m_consecutive: pick(args.m_consecutive, &c.m_consecutive).unwrap_or(d.m_consecutive),
        obj_tol_pct: pick(args.obj_tol_pct, &c.obj_tol_pct).unwrap_or(d.obj_tol_pct),
        recon_tol_pct: pick(args.recon_tol_pct, &c.recon_tol_pct).unwrap_or(d.recon_tol_pct),
        ..d
    };
    rc.settings.validate().map_err(CliError::Validation)?;

    let start = Instant::now();
    let results = retrieve_views(&rc, &views, &geometry)?;
    let wall = start.elapsed().as_secs_f64();

    create_dir(&out)?;
    let phase: Vec<RealImage> = results.iter().map(|r| r.phase.clone()).collect();
    let absorption: Vec<RealImage> = results.iter().map(|r| r.absorption.clone()).collect();
    let (mut iterations, mut converged, mut capped, mut failed) = (0, 0, 0, Vec::new());
    for (n, r) in results.iter().enumerate() {
        if let Some(trace) = &r.trace {
            write_text(&out.join("traces").join(format!("view_{n:04}.txt")), &trace.to_text())?;
            iterations += trace.iterations();
            match trace.termination {
                Termination::Converged => converged += 1,
                Termination::MaxIters => capped += 1,
                Termination::NumericalFailure => failed.push(n),
            }
        }
    }
    // Failed views are still written so they can be inspected.
    save(&phase, &geometry, ContentKind::Phase, &out.join("phase.toml"))?;
    save(&absorption, &geometry, ContentKind::Absorption, &out.join("absorption.toml"))?;
    if let Some(p) = rc.constraint {
        println!("constraint mode={} alpha={:e} gamma={:e} t_low={}", p.mode, p.alpha, p.gamma, p.t_low);
    }
    println!(
        "retrieve method={method} init={} views={} distances={} total_iterations={iterations} converged={converged} max_iters={capped} numerical_failures={} wall_s={wall:.3} output={}",
        rc.init,
        geometry.n_views(),
        geometry.n_distances(),
        failed.len(),
        out.display()
    );
    if !failed.is_empty() {
        return Err(CliError::Numerical(format!("views {failed:?} hit a non-finite objective")));
    }
    Ok(())
}
