use std::fs;
use std::path::Path;

use serde::Serialize;

use jetreg::convergence::{convergence_study, ConvergenceStudy, Partner};
use jetreg::flowmap::{grid_figure, warp_image};
use jetreg::image::{AnalyticImage, Interpolant, Rect, ScalarImage};
use jetreg::io::{load_image, save_pgm, write_atomic};
use jetreg::jet::JetStateFile;
use jetreg::presets::{shoot_preset, Preset};
use jetreg::register::{register_from, RegistrationProblem, RegistrationResult, SCHEMA_VERSION};
use jetreg::synthetic::synthetic_named;
use jetreg::KernelSpec;

use crate::error::{CliError, CliResult};
use crate::{config, ConvergenceArgs, RegisterArgs, ShootArgs};

const SYNTHETIC_PREFIX: &str = "synthetic:";

fn load_input(name: &str, resolution: usize) -> CliResult<ScalarImage> {
    if let Some(kind) = name.strip_prefix(SYNTHETIC_PREFIX) {
        return synthetic_named(kind, resolution).map_err(|e| CliError::Usage(e.to_string()));
    }
    load_image(name).map_err(|e| CliError::Usage(format!("{name}: {e}")))
}

fn prepare_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    write_atomic(path, text.as_bytes()).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

/// Momenta saved by an earlier run. Accepts a bare jet-state file or a
/// result.json, whose `initial` entry is used.
fn load_init(path: &Path, prob: &RegistrationProblem) -> CliResult<Vec<f64>> {
    let bad = |e: &dyn std::fmt::Display| CliError::Usage(format!("{}: {e}", path.display()));
    let text = fs::read_to_string(path).map_err(|e| bad(&e))?;
    let mut v: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(&e))?;
    if let Some(inner) = v.get_mut("initial") {
        v = inner.take();
    }
    let file: JetStateFile = serde_json::from_value(v).map_err(|e| bad(&e))?;
    let (state, spec) = file.into_parts().map_err(|e| bad(&e))?;
    if spec.sigma() != prob.spec.sigma() {
        eprintln!(
            "warning: {} was saved with kernel width {}, this run uses {}",
            path.display(),
            spec.sigma(),
            prob.spec.sigma()
        );
    }
    prob.momenta_of(&state).map_err(|e| bad(&e))
}

#[derive(Serialize)]
struct RegisterReport<'a> {
    #[serde(flatten)]
    result: &'a RegistrationResult,
    fixed: &'a str,
    moving: &'a str,
    seed: u64,
    artifacts: Vec<&'static str>,
}

pub fn register(args: RegisterArgs) -> CliResult<()> {
    if args.bits != 8 && args.bits != 16 {
        return Err(CliError::Usage(format!("--bits must be 8 or 16, got {}", args.bits)));
    }
    if args.grid_lines < 2 {
        return Err(CliError::Usage("--grid-lines must be at least 2".into()));
    }
    let settings = config::resolve(&args.problem)?;
    let fixed = load_input(&args.fixed, args.resolution)?;
    let moving = load_input(&args.moving, args.resolution)?;
    let prob = RegistrationProblem::from_images(&fixed, &moving, settings)?;
    let x0 = match &args.init {
        Some(path) => load_init(path, &prob)?,
        None => vec![0.0; prob.momentum_len()],
    };
    let res = register_from(&prob, &x0).map_err(CliError::Optimizer)?;
    let traj = res.trajectory.as_ref().expect("register keeps the trajectory");

    prepare_out(&args.out)?;
    let mut artifacts = vec!["result.json", "warped.pgm", "grid.csv", "trace.csv"];
    let warped = warp_image(
        traj,
        &Interpolant::fit(&moving),
        (fixed.width, fixed.height),
        &prob.spec,
    )?;
    let path = args.out.join("warped.pgm");
    save_pgm(&warped, &path, args.bits).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
    let grid = grid_figure(
        traj,
        args.grid_lines,
        5 * (args.grid_lines - 1) + 1,
        &prob.spec,
        &fixed.domain,
    )?;
    write_text(&args.out.join("grid.csv"), &grid.to_csv())?;
    write_text(&args.out.join("trace.csv"), &res.trace_csv())?;
    if args.trajectory {
        artifacts.push("trajectory.json");
        write_json(&args.out.join("trajectory.json"), &traj.export())?;
    }
    let report = RegisterReport {
        result: &res,
        fixed: &args.fixed,
        moving: &args.moving,
        seed: args.seed,
        artifacts,
    };
    write_json(&args.out.join("result.json"), &report)?;

    println!(
        "F {:.6e} -> {:.6e}, H {:.6e}, {} iterations ({:?}), max |grad| {:.2e}",
        res.identity_f, res.final_f, res.final_h, res.iterations, res.status, res.grad_norm
    );
    if res.final_f < 0.0 {
        eprintln!(
            "warning: the order-{} matching term ended negative ({:.3e}); it is not bounded below, so this \
             optimum is spurious. Try a larger --sigma, --sigma-match or a lower --match-order",
            prob.settings.match_order, res.final_f
        );
    }
    if res.clamp_count > 0 {
        println!(
            "note: {} image evaluations fell outside the domain and were clamped",
            res.clamp_count
        );
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct PresetReport {
    preset: &'static str,
    grid_file: String,
    /// `ln det` of the particle's carried Jacobian at t = 1.
    particle_logjac: f64,
    min_logjac: f64,
    final_state: JetStateFile,
}

#[derive(Serialize)]
struct ShootReport {
    schema_version: u32,
    sigma: f64,
    steps: usize,
    lines: usize,
    samples: usize,
    presets: Vec<PresetReport>,
}

pub fn shoot(args: ShootArgs) -> CliResult<()> {
    let presets: Vec<Preset> = if args.preset == "all" {
        Preset::FIGURE.to_vec()
    } else {
        vec![Preset::parse(&args.preset)?]
    };
    let spec = KernelSpec::new(args.sigma)?;
    let extent = Rect::unit();
    // run everything before touching the output directory
    let runs = presets
        .iter()
        .map(|&p| shoot_preset(p, args.sigma, args.steps, &extent, args.lines, args.samples))
        .collect::<Result<Vec<_>, _>>()?;

    prepare_out(&args.out)?;
    let mut reports = vec![];
    for run in &runs {
        let name = run.preset.name();
        let grid_file = format!("grid_{name}.csv");
        write_text(&args.out.join(&grid_file), &run.grid.to_csv())?;
        if args.trajectory {
            write_json(
                &args.out.join(format!("trajectory_{name}.json")),
                &run.trajectory.export(),
            )?;
        }
        println!(
            "{name:<12} particle log-Jacobian {:+.6e}, min grid log-Jacobian {:+.4}",
            run.particle_logjac,
            run.grid.min_logjac()
        );
        reports.push(PresetReport {
            preset: name,
            grid_file,
            particle_logjac: run.particle_logjac,
            min_logjac: run.grid.min_logjac(),
            final_state: JetStateFile::new(run.trajectory.last(), &spec),
        });
    }
    write_json(
        &args.out.join("shoot.json"),
        &ShootReport {
            schema_version: SCHEMA_VERSION,
            sigma: args.sigma,
            steps: args.steps,
            lines: args.lines,
            samples: args.samples,
            presets: reports,
        },
    )?;
    println!("wrote {}", args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct ConvergenceReport<'a> {
    schema_version: u32,
    #[serde(flatten)]
    study: &'a ConvergenceStudy,
}

pub fn convergence(args: ConvergenceArgs) -> CliResult<()> {
    let kind = AnalyticImage::parse(&args.kind)?;
    if kind == AnalyticImage::Zero {
        return Err(CliError::Usage("--kind must be linear, quadratic or trig".into()));
    }
    let partner = match args.shift.as_deref() {
        None => Partner::Zero,
        Some([dx, dy]) => Partner::Shifted([*dx, *dy]),
        Some(_) => unreachable!("clap enforces two values"),
    };
    let st = convergence_study(kind, partner, args.levels, args.fit_from, args.quad)?;
    print!("{}", st.to_csv());
    println!(
        "slopes over levels {}..={}: k=0 {:.3}, k=1 {:.3}, k=2 {:.3} (oracle {:.15})",
        st.fit_from, args.levels, st.slope0, st.slope1, st.slope2, st.oracle
    );
    if let Some(out) = &args.out {
        prepare_out(out)?;
        write_text(&out.join("convergence.csv"), &st.to_csv())?;
        write_json(
            &out.join("convergence.json"),
            &ConvergenceReport {
                schema_version: SCHEMA_VERSION,
                study: &st,
            },
        )?;
        println!("wrote {}", out.display());
    }
    Ok(())
}
