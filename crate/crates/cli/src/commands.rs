use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context as _, Result};
use polyptych::baseline::pim_reconstruct_with;
use polyptych::forward::{relative_amplitude_noise, PtychoModel, Role};
use polyptych::io::{
    export_stack_images, load_checkpoint, read_measurements, read_stack, save_checkpoint,
    write_json, write_measurements, write_stack, write_trace_csv, TraceRow,
};
use polyptych::optimizer::min_grad_certificate;
use polyptych::recon::{
    blind_advance, blind_start, check_blind_certificates, nonblind_object_with,
    nonblind_window_with, rate_certificate, relative_error, BlindRecord, BlindState, NonblindRun,
};
use polyptych::{BlockVector, Error as CoreError};
use serde_json::json;

use crate::config::{resolve, ExperimentConfig};

/// Flags shared by every experiment subcommand.
#[derive(Clone, Debug, Default)]
pub struct Settings {
    pub config: Option<PathBuf>,
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub check: bool,
}

pub struct Context {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
    pub preset: Option<String>,
}

impl Context {
    /// Resolves the configuration, applies flags, creates the output
    /// directory and writes the resolved `config.toml` into it.
    pub fn prepare(s: &Settings, vars: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut cfg = resolve(s.preset.as_deref(), s.config.as_deref(), vars)?;
        if let Some(seed) = s.seed {
            cfg.scenario.noise_seed = seed;
            cfg.pim.seed = seed;
        }
        if s.check {
            cfg.recon.check = true;
        }
        cfg.validate()?;
        std::fs::create_dir_all(&s.out).with_context(|| format!("creating {}", s.out.display()))?;
        std::fs::write(s.out.join("config.toml"), cfg.to_toml()?)?;
        Ok(Self {
            cfg,
            out: s.out.clone(),
            preset: s.preset.clone(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn images(&self, prefix: &str, v: &BlockVector) -> Result<()> {
        if self.cfg.run.images {
            let dir = self.path("images");
            std::fs::create_dir_all(&dir)?;
            export_stack_images(&dir, prefix, v)?;
        }
        Ok(())
    }
}

/// Measurements with the ground truth they came from.
pub struct Loaded {
    pub model: PtychoModel,
    pub y: Vec<f64>,
    pub object: BlockVector,
    pub probe: BlockVector,
}

/// Simulates from the scenario, or reads the dumps written by `simulate` from `data`.
pub fn load(cfg: &ExperimentConfig, data: Option<&Path>) -> Result<Loaded> {
    match data {
        None => {
            let inst = cfg.scenario.build()?;
            Ok(Loaded {
                model: inst.model,
                y: inst.data.into_vec(),
                object: inst.object,
                probe: inst.probe,
            })
        }
        Some(dir) => {
            let model = cfg.scenario.model()?;
            let object = read_stack(&dir.join("object.bin"))?;
            let probe = read_stack(&dir.join("probe.bin"))?;
            let y = read_measurements(&dir.join("data.bin"))?;
            model
                .check_stack(&object)
                .context("object dump does not match the scenario")?;
            model
                .check_stack(&probe)
                .context("probe dump does not match the scenario")?;
            if y.len() != model.measurement_count() {
                bail!(
                    "data dump has {} values, the scenario expects {}",
                    y.len(),
                    model.measurement_count()
                );
            }
            Ok(Loaded {
                model,
                y: y.into_vec(),
                object,
                probe,
            })
        }
    }
}

fn l_eps(model: &PtychoModel, y: &[f64], z: &BlockVector, w: &BlockVector, eps: f64) -> f64 {
    model
        .intensities(z, w)
        .iter()
        .zip(y)
        .map(|(&q, &yj)| ((q.max(0.0) + eps).sqrt() - (yj + eps).sqrt()).powi(2))
        .sum()
}

/// Raw and phase-aligned relative errors.
fn errors(estimate: &BlockVector, truth: &BlockVector) -> Result<(f64, f64)> {
    Ok((
        relative_error(estimate, truth, false)?,
        relative_error(estimate, truth, true)?,
    ))
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

pub fn simulate(ctx: &Context) -> Result<()> {
    let sc = &ctx.cfg.scenario;
    let inst = sc.build()?;
    write_stack(&ctx.path("object.bin"), &inst.object)?;
    write_stack(&ctx.path("probe.bin"), &inst.probe)?;
    write_measurements(&ctx.path("clean.bin"), &inst.clean)?;
    write_measurements(&ctx.path("data.bin"), &inst.data)?;
    let noise = relative_amplitude_noise(&inst.data, &inst.clean)?;
    write_json(
        &ctx.path("data.json"),
        &json!({
            "lambdas": sc.lambdas,
            "spectral_weights": sc.spectral_weights,
            "side": sc.side,
            "probe_side": sc.probe_side,
            "spacing": sc.spacing,
            "shifts": inst.model.shifts().shifts(),
            "photons": sc.photons,
            "seed": sc.noise_seed,
        }),
    )?;
    write_json(
        &ctx.path("summary.json"),
        &json!({
            "command": "simulate",
            "preset": ctx.preset,
            "shifts": inst.model.shifts().len(),
            "measurements": inst.data.len(),
            "relative_amplitude_noise": noise,
        }),
    )?;
    ctx.images("object", &inst.object)?;
    ctx.images("probe", &inst.probe)?;
    eprintln!(
        "simulated {} diffraction patterns of {}x{}, relative amplitude noise {noise:.4}",
        inst.model.shifts().len(),
        sc.side,
        sc.side
    );
    Ok(())
}

/// Which half of a non-blind problem is being solved.
#[derive(Clone, Copy, Debug)]
pub enum Known {
    Probe,
    Object,
}

pub fn recon_nonblind(ctx: &Context, data: Option<&Path>, known: Known) -> Result<()> {
    let cfg = &ctx.cfg;
    let d = load(cfg, data)?;
    let (truth, start, var, name) = match known {
        Known::Probe => (&d.object, cfg.scenario.flat_start(), "z", "object"),
        Known::Object => (&d.probe, cfg.scenario.probe_start()?, "w", "probe"),
    };
    let eps = cfg.recon.eps;
    let clock = Instant::now();
    let (raw0, aligned0) = errors(&start, truth)?;
    let mut rows = vec![TraceRow {
        outer: 0,
        sub: 0,
        var: var.into(),
        objective: f64::NAN,
        l_eps: match known {
            Known::Probe => l_eps(&d.model, &d.y, &start, &d.probe, eps),
            Known::Object => l_eps(&d.model, &d.y, &d.object, &start, eps),
        },
        grad_norm_sq: f64::NAN,
        step: f64::NAN,
        rel_err_raw: raw0,
        rel_err_aligned: aligned0,
        wall_ms: 0.0,
    }];
    let mut err = None;
    let observe = |r: &polyptych::optimizer::StepRecord, v: &BlockVector| {
        let loss = match known {
            Known::Probe => l_eps(&d.model, &d.y, v, &d.probe, eps),
            Known::Object => l_eps(&d.model, &d.y, &d.object, v, eps),
        };
        let (raw, aligned) = match errors(v, truth) {
            Ok(e) => e,
            Err(e) => {
                err.get_or_insert(e);
                (f64::NAN, f64::NAN)
            }
        };
        rows.push(TraceRow {
            outer: r.t,
            sub: 1,
            var: var.into(),
            objective: r.value,
            l_eps: loss,
            grad_norm_sq: r.grad_norm_sq,
            step: r.step,
            rel_err_raw: raw,
            rel_err_aligned: aligned,
            wall_ms: ms(clock),
        });
    };
    let run: NonblindRun = match known {
        Known::Probe => {
            nonblind_object_with(&d.model, &d.y, &d.probe, &start, &cfg.recon, observe)?
        }
        Known::Object => {
            nonblind_window_with(&d.model, &d.y, &d.object, &start, &cfg.recon, observe)?
        }
    };
    if let Some(e) = err {
        return Err(e.into());
    }
    rows[0].objective = run.trace.f0;
    let runtime = ms(clock);
    write_trace_csv(&ctx.path("trace.csv"), &rows)?;
    write_stack(&ctx.path(&format!("{name}_estimate.bin")), &run.estimate)?;
    ctx.images(&format!("{name}_estimate"), &run.estimate)?;
    let certificate = if run.trace.is_empty() {
        serde_json::Value::Null
    } else {
        let (lhs, rhs) = min_grad_certificate(&run.trace, run.mu_c, run.trace.f0)?;
        json!({ "min_grad_norm_sq": lhs, "bound": rhs, "holds": lhs <= rhs })
    };
    let last = rows.last().expect("initial row");
    write_json(
        &ctx.path("summary.json"),
        &json!({
            "command": format!("recon-{}", if matches!(known, Known::Probe) { "object" } else { "window" }),
            "preset": ctx.preset,
            "steps": run.trace.len(),
            "objective_initial": run.trace.f0,
            "objective_final": run.trace.final_value(),
            "l_eps_final": last.l_eps,
            "rel_err_raw": last.rel_err_raw,
            "rel_err_aligned": last.rel_err_aligned,
            "hessian_bound": run.bound,
            "mu_c": run.mu_c,
            "certificate": certificate,
            "runtime_ms": runtime,
        }),
    )?;
    eprintln!(
        "{} steps, objective {:.4e} -> {:.4e}, aligned {name} error {:.4}",
        run.trace.len(),
        run.trace.f0,
        run.trace.final_value(),
        last.rel_err_aligned
    );
    Ok(())
}

fn blind_row(r: &BlindRecord, errs: (f64, f64), wall_ms: f64) -> TraceRow {
    TraceRow {
        outer: r.outer,
        sub: r.sub,
        var: match r.var {
            Role::Object => "z".into(),
            Role::Window => "w".into(),
        },
        objective: r.value,
        l_eps: r.l_eps,
        grad_norm_sq: r.grad_norm_sq,
        step: r.step,
        rel_err_raw: errs.0,
        rel_err_aligned: errs.1,
        wall_ms,
    }
}

fn dump_state(dir: &Path, state: &BlindState, ctx: &Context, rows: &[TraceRow]) -> Result<()> {
    save_checkpoint(dir, state, &ctx.cfg.recon)?;
    write_trace_csv(&dir.join("trace.csv"), rows)?;
    Ok(())
}

/// Rows of the blind trace use the object error for both variables.
pub fn recon_blind(ctx: &Context, data: Option<&Path>, resume: Option<&Path>) -> Result<()> {
    let cfg = &ctx.cfg;
    let d = load(cfg, data)?;
    let clock = Instant::now();
    let mut state = match resume {
        Some(dir) => {
            let (state, saved) = load_checkpoint(dir)?;
            let mut expected = saved.clone();
            expected.iterations = cfg.recon.iterations;
            expected.check = cfg.recon.check;
            if expected != cfg.recon {
                bail!(
                    "checkpoint in {} was made with different reconstruction settings",
                    dir.display()
                );
            }
            state
        }
        None => blind_start(
            &d.model,
            &d.y,
            &cfg.scenario.flat_start(),
            &cfg.scenario.probe_start()?,
            &cfg.recon,
        )?,
    };
    let mut rows: Vec<TraceRow> = state
        .records
        .iter()
        .map(|r| blind_row(r, (f64::NAN, f64::NAN), f64::NAN))
        .collect();
    let remaining = cfg.recon.iterations.saturating_sub(state.completed);
    let mut err = None;
    let result = blind_advance(
        &d.model,
        &d.y,
        &mut state,
        &cfg.recon,
        remaining,
        |r, z, _| {
            let errs = errors(z, &d.object).unwrap_or_else(|e| {
                err.get_or_insert(e);
                (f64::NAN, f64::NAN)
            });
            rows.push(blind_row(r, errs, ms(clock)));
        },
    );
    if let Err(e) = result {
        if let CoreError::BlindCertificate { state: failed, .. } = &e {
            let dir = ctx.path("failure");
            dump_state(&dir, failed, ctx, &rows)?;
            eprintln!(
                "certificate violated; state and trace written to {}",
                dir.display()
            );
        }
        return Err(e.into());
    }
    if let Some(e) = err {
        return Err(e.into());
    }
    let runtime = ms(clock);
    dump_state(&ctx.path("checkpoint"), &state, ctx, &rows)?;
    write_trace_csv(&ctx.path("trace.csv"), &rows)?;
    write_stack(&ctx.path("object_estimate.bin"), &state.z)?;
    write_stack(&ctx.path("probe_estimate.bin"), &state.w)?;
    ctx.images("object_estimate", &state.z)?;
    ctx.images("probe_estimate", &state.w)?;

    let certificates = match check_blind_certificates(&state, &cfg.recon) {
        Ok(()) => json!({ "holds": true }),
        Err(e) => json!({ "holds": false, "message": e.to_string() }),
    };
    let rate = if cfg.recon.alpha_t > 0.0 && cfg.recon.beta_t > 0.0 && state.completed > 0 {
        let (min_s, bound) = rate_certificate(&state, &cfg.recon, &d.model)?;
        json!({ "min_s": min_s, "bound": bound, "holds": min_s <= bound })
    } else {
        serde_json::Value::Null
    };
    let (obj_raw, obj_aligned) = errors(&state.z, &d.object)?;
    let (probe_raw, probe_aligned) = errors(&state.w, &d.probe)?;
    let last = state.records.last();
    write_json(
        &ctx.path("summary.json"),
        &json!({
            "command": "recon-blind",
            "preset": ctx.preset,
            "outer_iterations": state.completed,
            "object_steps": cfg.recon.object_steps,
            "window_steps": cfg.recon.window_steps,
            "objective_initial": state.j0,
            "objective_final": last.map_or(state.j0, |r| r.value),
            "l_eps_final": last.map(|r| r.l_eps),
            "object_rel_err_raw": obj_raw,
            "object_rel_err_aligned": obj_aligned,
            "probe_rel_err_raw": probe_raw,
            "probe_rel_err_aligned": probe_aligned,
            "certificates": certificates,
            "rate_certificate": rate,
            "runtime_ms": runtime,
        }),
    )?;
    if let Some(r) = last {
        eprintln!(
            "{} outer iterations, objective {:.4e} -> {:.4e}, aligned object error {obj_aligned:.4}",
            state.completed, state.j0, r.value
        );
    }
    Ok(())
}

pub fn pim(ctx: &Context, data: Option<&Path>) -> Result<()> {
    let cfg = &ctx.cfg;
    let d = load(cfg, data)?;
    let z0 = cfg.scenario.flat_start();
    let w0 = if cfg.pim.blind {
        cfg.scenario.probe_start()?
    } else {
        d.probe.clone()
    };
    let var = if cfg.pim.blind { "zw" } else { "z" };
    let clock = Instant::now();
    let errs0 = errors(&z0, &d.object)?;
    let mut rows = vec![];
    let mut err = None;
    let run = pim_reconstruct_with(&d.model, &d.y, &z0, &w0, &cfg.pim, |r, z, _| {
        let errs = errors(z, &d.object).unwrap_or_else(|e| {
            err.get_or_insert(e);
            (f64::NAN, f64::NAN)
        });
        rows.push(TraceRow {
            outer: r.sweep,
            sub: 1,
            var: var.into(),
            objective: r.l_eps,
            l_eps: r.l_eps,
            grad_norm_sq: f64::NAN,
            step: cfg.pim.alpha,
            rel_err_raw: errs.0,
            rel_err_aligned: errs.1,
            wall_ms: ms(clock),
        });
    })?;
    if let Some(e) = err {
        return Err(e.into());
    }
    let runtime = ms(clock);
    rows.insert(
        0,
        TraceRow {
            outer: 0,
            sub: 0,
            var: var.into(),
            objective: run.l_eps0,
            l_eps: run.l_eps0,
            grad_norm_sq: f64::NAN,
            step: f64::NAN,
            rel_err_raw: errs0.0,
            rel_err_aligned: errs0.1,
            wall_ms: 0.0,
        },
    );
    write_trace_csv(&ctx.path("trace.csv"), &rows)?;
    write_stack(&ctx.path("object_estimate.bin"), &run.z)?;
    ctx.images("object_estimate", &run.z)?;
    if cfg.pim.blind {
        write_stack(&ctx.path("probe_estimate.bin"), &run.w)?;
        ctx.images("probe_estimate", &run.w)?;
    }
    let last = rows.last().expect("initial row");
    write_json(
        &ctx.path("summary.json"),
        &json!({
            "command": "pim",
            "preset": ctx.preset,
            "alpha": cfg.pim.alpha,
            "blind": cfg.pim.blind,
            "sweeps": run.records.len(),
            "l_eps_initial": run.l_eps0,
            "l_eps_final": last.l_eps,
            "rel_err_raw": last.rel_err_raw,
            "rel_err_aligned": last.rel_err_aligned,
            "runtime_ms": runtime,
        }),
    )?;
    eprintln!(
        "{} sweeps, L_eps {:.4e} -> {:.4e}, aligned object error {:.4}",
        run.records.len(),
        run.l_eps0,
        last.l_eps,
        last.rel_err_aligned
    );
    Ok(())
}
