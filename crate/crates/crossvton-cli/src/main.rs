//! Command-line front end: routing inspection, mask operations,
//! pipeline runs, toy training, and evaluation.
//!
//! Exit codes: 0 success, 1 run-level failure (backend failure ratio
//! over threshold, unreadable inputs, …), 2 usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crossvton::backends::ScriptedJudge;
use crossvton::config::RunConfig;
use crossvton::evalkit::{self, EvalCase, EvalConfig};
use crossvton::flowtoy::{train_toy_two_stage, TrainConfig};
use crossvton::maskcore::{
    self, decode_binary_mask_png, encode_binary_mask_png, BinaryMask, GarmentSpec,
};
use crossvton::pipeline::{self, corpus, MockBackendSet, RunOptions};
use crossvton::routing::{all_pairs, enumerate_plan, plan_line, route};
use crossvton::zonealgebra::{self, Round2Parenthesization};

#[derive(Parser)]
#[command(name = "crossvton", version, about = "Tri-zone try-on data construction toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Look up the construction method for a (target, source) spec pair
    Route(RouteArgs),
    /// Run the two-round quadruplet construction pipeline
    Construct(ConstructArgs),
    /// Build a ground-truth tri-zone mask from mask files
    Trizone(TrizoneArgs),
    /// Stretch or shrink a generation-region mask
    AdjustMask(AdjustArgs),
    /// Train the desk-scale two-stage model on procedural quadruplets
    TrainToy(TrainArgs),
    /// Judge try-on cases and aggregate the accuracy rate
    EvalAcc(EvalArgs),
    /// Structural similarity between two images
    Ssim(SsimArgs),
}

#[derive(Args)]
struct RouteArgs {
    /// Target garment spec, e.g. upper/long or skirt-long
    #[arg(long, required_unless_present = "table")]
    pc: Option<String>,
    /// Source model's garment spec
    #[arg(long, required_unless_present = "table")]
    pg: Option<String>,
    /// Print all 36 table cells instead
    #[arg(long)]
    table: bool,
    /// One-line machine-readable output
    #[arg(long)]
    json: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum RoundArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    All,
}

#[derive(Args)]
struct ConstructArgs {
    /// Use the deterministic mock backends
    #[arg(long)]
    mock: bool,
    #[arg(long, value_enum, default_value = "all")]
    round: RoundArg,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "crossvton-out")]
    out: PathBuf,
    /// Optional TOML config file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Continue an interrupted run, skipping completed records
    #[arg(long)]
    resume: bool,
    /// Declare the try-on backend round-1 trained (gates round 2)
    #[arg(long)]
    round1_trained: bool,
    #[arg(long)]
    failure_threshold: Option<f64>,
}

#[derive(Args)]
struct TrizoneArgs {
    #[arg(long, value_enum)]
    round: RoundArg,
    /// Parsing map PNG of the ground-truth model
    #[arg(long)]
    pm: PathBuf,
    /// Palette sidecar for --pm
    #[arg(long)]
    palette: PathBuf,
    /// Class name of the worn garment within the parsing map
    #[arg(long)]
    garment_class: String,
    /// Foreground mask PNG of the constructed image
    #[arg(long)]
    fg: PathBuf,
    /// Generation-region mask PNG (round 1)
    #[arg(long)]
    gen: Option<PathBuf>,
    /// Predicted try-on zone mask PNG (round 2)
    #[arg(long)]
    tryon_p: Option<PathBuf>,
    /// Predicted imagination zone mask PNG (round 2)
    #[arg(long)]
    imagi_p: Option<PathBuf>,
    /// Round-2 formula reading: union-then-intersect (default) or
    /// intersect-then-union
    #[arg(long, default_value = "union-then-intersect")]
    parenthesization: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AdjustArgs {
    /// stretch (extend to a densepose part) or shrink (cut bottom rows)
    #[arg(long)]
    mode: String,
    /// Generation-region mask PNG
    #[arg(long)]
    gen: PathBuf,
    /// Densepose label PNG (stretch mode)
    #[arg(long)]
    densepose: Option<PathBuf>,
    /// Palette sidecar for --densepose
    #[arg(long)]
    palette: Option<PathBuf>,
    /// Target densepose part (stretch mode)
    #[arg(long)]
    part: Option<String>,
    /// Shrink fraction range, e.g. 0.15,0.45 (shrink mode)
    #[arg(long)]
    range: Option<String>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out_adjusted: PathBuf,
    #[arg(long)]
    out_residual: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Stage-1 steps; 0 reports the initial loss only
    #[arg(long, default_value_t = 300)]
    steps: usize,
    #[arg(long, default_value_t = 100)]
    stage2_steps: usize,
    #[arg(long, default_value_t = 200)]
    quadruplets: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Write per-step losses as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Verdict script for the mock judge (R/U/F per line)
    #[arg(long)]
    mock_judge: PathBuf,
    /// Number of procedural cases; defaults to the script length
    #[arg(long)]
    cases: Option<usize>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Write the full report as JSON
    #[arg(long)]
    json_out: Option<PathBuf>,
}

#[derive(Args)]
struct SsimArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long, default_value_t = 8)]
    window: u32,
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(1)
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("usage error: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Route(args) => cmd_route(args),
        Command::Construct(args) => cmd_construct(args),
        Command::Trizone(args) => cmd_trizone(args),
        Command::AdjustMask(args) => cmd_adjust(args),
        Command::TrainToy(args) => cmd_train(args),
        Command::EvalAcc(args) => cmd_eval(args),
        Command::Ssim(args) => cmd_ssim(args),
    }
}

fn parse_spec(token: &str) -> Result<GarmentSpec, String> {
    GarmentSpec::parse(token)
}

fn cmd_route(args: RouteArgs) -> ExitCode {
    if args.table {
        for pair in all_pairs() {
            let plan = enumerate_plan(&[pair]);
            let planned = plan
                .round1
                .first()
                .or(plan.round2.first())
                .or(plan.rejected.first())
                .expect("every pair lands in one group");
            println!("{}", plan_line(planned));
        }
        return ExitCode::SUCCESS;
    }
    let (pc, pg) = (args.pc.unwrap(), args.pg.unwrap());
    let pc = match parse_spec(&pc) {
        Ok(s) => s,
        Err(e) => return usage(e),
    };
    let pg = match parse_spec(&pg) {
        Ok(s) => s,
        Err(e) => return usage(e),
    };
    let decision = route(pc, pg);
    if args.json {
        println!(
            "{}",
            serde_json::json!({
                "pc": pc.to_string(),
                "pg": pg.to_string(),
                "method": decision.method.to_string(),
                "round": decision.round.to_string(),
            })
        );
    } else {
        println!("pc={pc} pg={pg} method={} round={}", decision.method, decision.round);
    }
    ExitCode::SUCCESS
}

fn cmd_construct(args: ConstructArgs) -> ExitCode {
    if !args.mock {
        return usage("only --mock runs are supported without a configured endpoint");
    }
    let mut config = match &args.config {
        Some(path) => match RunConfig::from_path(path) {
            Ok(c) => c,
            Err(e) => return fail(e),
        },
        None => RunConfig::default(),
    }
    .with_env_overrides();
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(t) = args.failure_threshold {
        config.failure_threshold = t;
    }
    config.output_dir = args.out.clone();
    config.round1_trained |= args.round1_trained;
    if let Err(e) = config.validate() {
        return usage(e);
    }

    let pairs = all_pairs();
    let mut plan = enumerate_plan(&pairs);
    match args.round {
        RoundArg::One => plan.round2.clear(),
        RoundArg::Two => plan.round1.clear(),
        RoundArg::All => {}
    }

    let mocks = MockBackendSet::new();
    let options = RunOptions { resume: args.resume, stop_after: None };
    let report = match pipeline::run(&plan, &mocks.as_refs(), &config, &options) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    println!(
        "records written: {}  skipped: {}  failures: {}  rejected: {}",
        report.records_written, report.records_skipped, report.failures, report.rejected
    );
    for path in [&report.round1_manifest, &report.round2_manifest].into_iter().flatten() {
        match pipeline::validate_manifest(path) {
            Ok(v) if v.is_clean() => println!("{}: valid", path.display()),
            Ok(v) => {
                for violation in &v.violations {
                    eprintln!("{}: {violation}", path.display());
                }
                return fail(format!("{} validation violation(s)", v.violations.len()));
            }
            Err(e) => return fail(e),
        }
    }
    if report.threshold_exceeded {
        return fail("failure ratio exceeded the configured threshold");
    }
    ExitCode::SUCCESS
}

fn load_mask(path: &Path) -> Result<BinaryMask, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    decode_binary_mask_png(&bytes).map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_trizone(args: TrizoneArgs) -> ExitCode {
    let pm = match maskcore::load_label_map(&args.pm, &args.palette) {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    let fg = match load_mask(&args.fg) {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    let result = match args.round {
        RoundArg::One => {
            let Some(gen_path) = &args.gen else {
                return usage("--gen is required for round 1");
            };
            let gen = match load_mask(gen_path) {
                Ok(m) => m,
                Err(e) => return fail(e),
            };
            zonealgebra::round1_trizone_gt(&zonealgebra::Round1Inputs {
                pm_g: pm,
                garment_class: args.garment_class,
                gen_region: gen,
                fg_c: fg,
            })
        }
        RoundArg::Two => {
            let (Some(tp), Some(ip)) = (&args.tryon_p, &args.imagi_p) else {
                return usage("--tryon-p and --imagi-p are required for round 2");
            };
            let policy = match args.parenthesization.as_str() {
                "union-then-intersect" => Round2Parenthesization::UnionThenIntersect,
                "intersect-then-union" => Round2Parenthesization::IntersectThenUnion,
                other => return usage(format!("unknown parenthesization {other:?}")),
            };
            let tryon_p = match load_mask(tp) {
                Ok(m) => m,
                Err(e) => return fail(e),
            };
            let imagi_p = match load_mask(ip) {
                Ok(m) => m,
                Err(e) => return fail(e),
            };
            zonealgebra::round2_trizone_gt(
                &zonealgebra::Round2Inputs {
                    pm_g2: pm,
                    garment_class: args.garment_class,
                    tryon_p,
                    imagi_p,
                    fg_c: fg,
                },
                policy,
            )
        }
        RoundArg::All => return usage("trizone takes --round 1 or --round 2"),
    };
    let mask = match result {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    match maskcore::save_trizone_mask(&mask, &args.out) {
        Ok(()) => {
            let [recon, imagi, tryon] = mask.histogram();
            println!("tryon={tryon} imagi={imagi} recon={recon} -> {}", args.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn cmd_adjust(args: AdjustArgs) -> ExitCode {
    use crossvton::maskadjust::{shrink_up, stretch_down, ShiftPolicy};
    let gen = match load_mask(&args.gen) {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    let adjusted = match args.mode.as_str() {
        "stretch" => {
            let (Some(dp), Some(pal), Some(part)) = (&args.densepose, &args.palette, &args.part)
            else {
                return usage("stretch mode needs --densepose, --palette, and --part");
            };
            let densepose = match maskcore::load_label_map(dp, pal) {
                Ok(m) => m,
                Err(e) => return fail(e),
            };
            match stretch_down(&gen, &densepose, &ShiftPolicy::stretch_down(part.clone(), args.seed))
            {
                Ok(a) => a,
                Err(e) => return fail(e),
            }
        }
        "shrink" => {
            let range = match &args.range {
                None => (0.15, 0.45),
                Some(text) => {
                    let parts: Vec<_> = text.split(',').collect();
                    let parsed = (|| {
                        if parts.len() != 2 {
                            return None;
                        }
                        Some((parts[0].trim().parse().ok()?, parts[1].trim().parse().ok()?))
                    })();
                    match parsed {
                        Some(r) => r,
                        None => return usage(format!("bad --range {text:?}, expected min,max")),
                    }
                }
            };
            match shrink_up(&gen, &ShiftPolicy::shrink_up(range, args.seed)) {
                Ok(a) => a,
                Err(e) => return fail(e),
            }
        }
        other => return usage(format!("unknown mode {other:?}, expected stretch or shrink")),
    };
    if let Err(e) = std::fs::write(&args.out_adjusted, encode_binary_mask_png(&adjusted.adjusted))
    {
        return fail(e);
    }
    if let Some(out) = &args.out_residual {
        if let Err(e) = std::fs::write(out, encode_binary_mask_png(&adjusted.residual)) {
            return fail(e);
        }
    }
    println!(
        "adjusted={} residual={}",
        adjusted.adjusted.count_ones(),
        adjusted.residual.count_ones()
    );
    ExitCode::SUCCESS
}

fn cmd_train(args: TrainArgs) -> ExitCode {
    let data = corpus::generate_toy_quadruplets(args.quadruplets, args.seed);
    let config = TrainConfig {
        seed: args.seed,
        stage1_steps: args.steps,
        stage2_steps: args.stage2_steps,
        ..TrainConfig::default()
    };
    let report = match train_toy_two_stage(&data, &config) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    println!("{}", report.summary().trim_end());
    if let Some(path) = &args.csv {
        if let Err(e) = std::fs::write(path, report.to_csv()) {
            return fail(e);
        }
    }
    ExitCode::SUCCESS
}

fn cmd_eval(args: EvalArgs) -> ExitCode {
    let script = match std::fs::read_to_string(&args.mock_judge) {
        Ok(s) => s,
        Err(e) => return fail(format!("{}: {e}", args.mock_judge.display())),
    };
    let judge = ScriptedJudge::from_script(&script);
    let count = args.cases.unwrap_or_else(|| judge.remaining());

    // procedural cases: a figure, a target swatch, and a constructed result
    let specs = GarmentSpec::all();
    let cases: Vec<EvalCase> = (0..count)
        .map(|i| {
            let pg = specs[i % specs.len()];
            let pc = specs[(i + args.seed as usize) % specs.len()];
            let shift = (i % 3) as u32;
            EvalCase {
                id: format!("eval-{i:04}"),
                model_image: corpus::generate_figure(pg, corpus::GarmentShade::A, shift),
                garment_image: corpus::garment_swatch(pc, corpus::GarmentShade::B),
                result_image: corpus::generate_figure(pc, corpus::GarmentShade::B, shift),
                category_pair: (pc, pg),
            }
        })
        .collect();

    let report = evalkit::evaluate_acc(&cases, &judge, &EvalConfig::default());
    print!("{}", report.render());
    if let Some(path) = &args.json_out {
        let per_category: serde_json::Map<String, serde_json::Value> = report
            .per_category
            .iter()
            .map(|((pc, pg), tally)| {
                (format!("pc={pc} pg={pg}"), serde_json::json!(tally))
            })
            .collect();
        let json = serde_json::json!({
            "total": report.total,
            "reasonable": report.reasonable,
            "failures": report.failures,
            "acc": report.acc,
            "per_category": per_category,
        });
        if let Err(e) = std::fs::write(path, serde_json::to_string_pretty(&json).unwrap()) {
            return fail(e);
        }
    }
    if report.total > 0 && report.acc.is_none() {
        return fail("every judge call failed; accuracy is undefined");
    }
    ExitCode::SUCCESS
}

fn cmd_ssim(args: SsimArgs) -> ExitCode {
    let a = match maskcore::load_rgb_image(&args.a) {
        Ok(i) => i,
        Err(e) => return fail(e),
    };
    let b = match maskcore::load_rgb_image(&args.b) {
        Ok(i) => i,
        Err(e) => return fail(e),
    };
    match evalkit::ssim_with(&a, &b, args.window, Default::default()) {
        Ok(value) => {
            println!("{value:.6}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}
