use std::fs;
use std::path::{Path, PathBuf};

use imc_core::bench::{bench_mc, bench_sweep, OracleSweep, Timing};
use imc_core::device::generate_dataset;
use imc_core::dnn::{
    infer_and_score, make_task, quantize_task, AccuracyRow, Lut, MulBackend, Stochastic,
};
use imc_core::explore::{
    max_discharge_pair, mismatch_mc, pvt_sweep, select_corners, sweep_corners, CornerFailure,
    CornerMetrics, PvtSweepResult, Selection,
};
use imc_core::fit::{fit_all, rms_report, FitReport, ModelFile, SCHEMA_VERSION};
use imc_core::io::{
    fmt_f64, load_model, read_csv, read_dataset, read_json, save_model, write_csv, write_dataset,
    write_json,
};
use imc_core::rng::mix;
use imc_core::sim::{
    calibrate_adc, exhaustive_error, AdcCalibration, CircuitConfig, Mode, Multiplier,
};
use imc_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::manifest::RunManifest;
use crate::{Cli, Command, CornerArgs, ModeArg};

pub const CORNERS_HEADER: [&str; 7] = [
    "tau0_s",
    "v_dac0_v",
    "v_dac_fs_v",
    "eps_mul_lsb",
    "e_mul_j",
    "fom",
    "sigma_max_v",
];
pub const PAIRS_HEADER: [&str; 8] = [
    "a",
    "b",
    "exact",
    "code",
    "err_lsb",
    "dv_comb_v",
    "e_mul_j",
    "e_op_j",
];
pub const PAIRS_MC_EXTRA: [&str; 3] = ["mean_code", "sigma_code", "sigma_dv_v"];
pub const PVT_HEADER: [&str; 4] = ["axis", "value", "eps_mul_lsb", "error"];
pub const MC_HEADER: [&str; 6] = [
    "a",
    "b",
    "mean_code",
    "sigma_code",
    "sigma_analog_v",
    "sigma_model_v",
];
pub const LUT_HEADER: [&str; 3] = ["a", "b", "expected_code"];
pub const ACCURACY_HEADER: [&str; 3] = ["backend", "top1", "topk"];

const CORNER_NAMES: [&str; 3] = ["fom", "power", "variation"];

struct Ctx<'a> {
    cli: &'a Cli,
    cfg: Config,
    out: PathBuf,
    manifest: RunManifest,
}

impl Ctx<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn input_or(&mut self, given: &Option<PathBuf>, default: &str) -> PathBuf {
        let p = given.clone().unwrap_or_else(|| self.path(default));
        self.manifest.input(&p);
        p
    }

    fn load_model(&mut self, given: &Option<PathBuf>) -> Result<ModelFile> {
        let p = self.input_or(given, "model.json");
        require_file(&p, "imc fit")?;
        load_model(&p)
    }

    fn load_selection(&mut self) -> Result<SelectionFile> {
        let p = self.path("selected.json");
        self.manifest.input(&p);
        require_file(&p, "imc explore")?;
        read_json(&p)
    }
}

fn require_file(p: &Path, producer: &str) -> Result<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(Error::usage(format!(
            "input file {} not found; run `{producer}` first or pass its path",
            p.display()
        )))
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let jobs = cli
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        return Err(Error::usage("--jobs must be at least 1"));
    }
    // Ignore the error when a pool already exists (repeated runs in-process).
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global();
    let cfg = Config::load(cli.config.as_deref())?;
    fs::create_dir_all(&cli.out).map_err(|source| Error::Io {
        path: cli.out.clone(),
        source,
    })?;
    let name = match &cli.command {
        Command::OracleGen { .. } => "oracle-gen",
        Command::Fit { .. } => "fit",
        Command::Eval { .. } => "eval",
        Command::Explore { .. } => "explore",
        Command::Pvt { .. } => "pvt",
        Command::Mc { .. } => "mc",
        Command::Dnn { .. } => "dnn",
        Command::Bench { .. } => "bench",
        Command::Report => "report",
    };
    let mut manifest = RunManifest::new(name, cli.seed, jobs, &cfg);
    if let Some(c) = &cli.config {
        manifest.input(c);
    }
    dispatch(Ctx {
        cli,
        cfg,
        out: cli.out.clone(),
        manifest,
    })
}

fn dispatch(mut ctx: Ctx<'_>) -> Result<()> {
    match &ctx.cli.command {
        Command::OracleGen { n_mc } => oracle_gen(&mut ctx, *n_mc)?,
        Command::Fit { data, holdout } => fit(&mut ctx, data, holdout)?,
        Command::Eval {
            model,
            corner,
            mode,
            n_mc,
        } => eval(&mut ctx, model, corner, *mode, *n_mc)?,
        Command::Explore { model, n_mc } => explore(&mut ctx, model, *n_mc)?,
        Command::Pvt { model, corner } => pvt(&mut ctx, model, corner)?,
        Command::Mc {
            model,
            corner,
            n_mc,
        } => mc(&mut ctx, model, corner, *n_mc)?,
        Command::Dnn { model, stochastic } => dnn(&mut ctx, model, *stochastic)?,
        Command::Bench { model, corner } => bench(&mut ctx, model, corner)?,
        Command::Report => report(&mut ctx)?,
    }
    let path = ctx.manifest.write(&ctx.out)?;
    println!("manifest: {}", path.display());
    Ok(())
}

fn oracle_gen(ctx: &mut Ctx<'_>, n_mc: Option<usize>) -> Result<()> {
    if let Some(n) = n_mc {
        ctx.cfg.n_mc_fit = n;
        ctx.manifest.config.n_mc_fit = n;
    }
    let cfg = ctx.cfg.clone();
    let seed = ctx.cli.seed;
    let train = ctx.manifest.time("train", || {
        generate_dataset(&cfg.grid, &cfg.device, cfg.n_mc_fit, seed)
    })?;
    let hold_grid = cfg.grid.holdout(cfg.device.v_dd_nom, cfg.device.t_nom);
    let hold = ctx.manifest.time("holdout", || {
        generate_dataset(&hold_grid, &cfg.device, cfg.n_mc_fit, mix(seed, 1))
    })?;
    for (name, d) in [("dataset.csv", &train), ("holdout.csv", &hold)] {
        let p = ctx.path(name);
        write_dataset(&p, d)?;
        ctx.manifest.output(&p);
        ctx.manifest.output(&imc_core::io::sidecar_path(&p));
        println!("{}: {} rows", p.display(), d.rows.len());
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FitReportFile {
    pub training: FitReport,
    pub holdout: Option<FitReport>,
}

fn print_report(label: &str, r: &FitReport) {
    let parts: Vec<String> = r
        .entries
        .iter()
        .map(|(k, e)| format!("{k} {:.3} {}", e.rms, e.unit))
        .collect();
    println!("{label} RMS: {}", parts.join(", "));
}

fn fit(ctx: &mut Ctx<'_>, data: &Option<PathBuf>, holdout: &Option<PathBuf>) -> Result<()> {
    let dp = ctx.input_or(data, "dataset.csv");
    require_file(&dp, "imc oracle-gen")?;
    let train = read_dataset(&dp)?;
    let hp = holdout.clone().unwrap_or_else(|| ctx.path("holdout.csv"));
    let hold = if hp.is_file() {
        ctx.manifest.input(&hp);
        Some(read_dataset(&hp)?)
    } else if holdout.is_some() {
        return Err(Error::usage(format!(
            "holdout file {} not found",
            hp.display()
        )));
    } else {
        None
    };
    let (models, training) = ctx.manifest.time("fit", || fit_all(&train))?;
    let hold_report = match &hold {
        Some(h) => Some(ctx.manifest.time("holdout", || rms_report(&models, h))?),
        None => None,
    };
    print_report("training", &training);
    if let Some(h) = &hold_report {
        print_report("holdout", h);
    }
    let file = ModelFile {
        schema_version: SCHEMA_VERSION,
        models,
        training: training.clone(),
        holdout: hold_report.clone(),
        oracle_seed: train.seed,
        params: train.params.clone(),
    };
    let mp = ctx.path("model.json");
    save_model(&mp, &file)?;
    ctx.manifest.output(&mp);
    let rp = ctx.path("fit_report.json");
    write_json(
        &rp,
        &FitReportFile {
            training,
            holdout: hold_report,
        },
    )?;
    ctx.manifest.output(&rp);
    Ok(())
}

/// Corner from `--corner`, explicit flags or the config, in that order.
fn resolve_corner(
    ctx: &mut Ctx<'_>,
    args: &CornerArgs,
    model: &ModelFile,
) -> Result<(String, CircuitConfig)> {
    let d = &model.models.discharge;
    if let Some(name) = &args.corner {
        if args.tau0.is_some() || args.vdac0.is_some() || args.vdacfs.is_some() {
            return Err(Error::usage(
                "--corner cannot be combined with --tau0/--vdac0/--vdacfs",
            ));
        }
        let sel = ctx.load_selection()?;
        let m = sel.selection.get(name).ok_or_else(|| {
            Error::usage(format!(
                "unknown corner '{name}'; expected fom, power or variation"
            ))
        })?;
        return Ok((name.clone(), m.config));
    }
    let tau0 = args.tau0.unwrap_or(ctx.cfg.tau0);
    let v0 = args.vdac0.unwrap_or(ctx.cfg.v_dac0);
    let vfs = args.vdacfs.unwrap_or(ctx.cfg.v_dac_fs);
    ctx.cfg.tau0 = tau0;
    ctx.cfg.v_dac0 = v0;
    ctx.cfg.v_dac_fs = vfs;
    ctx.manifest.config = ctx.cfg.clone();
    let mut c = CircuitConfig::nominal(tau0, v0, vfs, d);
    c.seed = ctx.cli.seed;
    Ok(("custom".into(), c))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvalSummary {
    pub corner: String,
    pub config: CircuitConfig,
    pub calibration: AdcCalibration,
    pub mode: Mode,
    pub n_mc: usize,
    pub eps_mul: f64,
    pub e_mul_avg: f64,
    pub e_op_avg: f64,
    /// Averaging used for ε.
    pub eps_definition: String,
}

fn eval(
    ctx: &mut Ctx<'_>,
    model: &Option<PathBuf>,
    corner: &CornerArgs,
    mode: ModeArg,
    n_mc: Option<usize>,
) -> Result<()> {
    let mf = ctx.load_model(model)?;
    let (name, cfg) = resolve_corner(ctx, corner, &mf)?;
    let mode = match mode {
        ModeArg::Nominal => Mode::Nominal,
        ModeArg::Mc => Mode::Mc,
    };
    let n = n_mc.unwrap_or(ctx.cfg.n_mc_sweep);
    let models = &mf.models;
    let cal = calibrate_adc(&cfg, models)?;
    let ex = ctx
        .manifest
        .time("eval", || exhaustive_error(&cfg, models, &cal, mode, n))?;
    let mut header: Vec<&str> = PAIRS_HEADER.to_vec();
    if mode == Mode::Mc {
        header.extend(PAIRS_MC_EXTRA);
    }
    let pp = ctx.path(&format!("pairs_{name}.csv"));
    write_csv(
        &pp,
        &header,
        ex.pairs.iter().map(|p| {
            let r = &p.nominal;
            let mut row = vec![
                p.a.to_string(),
                p.b.to_string(),
                r.exact.to_string(),
                r.code.to_string(),
                r.err_lsb.to_string(),
                fmt_f64(r.dv_comb),
                fmt_f64(r.e_mul),
                fmt_f64(r.e_op),
            ];
            if let Some(m) = &p.mc {
                row.extend([
                    fmt_f64(m.mean_code),
                    fmt_f64(m.sigma_code),
                    fmt_f64(m.sigma_dv),
                ]);
            }
            row
        }),
    )?;
    ctx.manifest.output(&pp);
    let sp = ctx.path(&format!("eval_{name}.json"));
    write_json(
        &sp,
        &EvalSummary {
            corner: name.clone(),
            config: cfg,
            calibration: cal,
            mode,
            n_mc: if mode == Mode::Mc { n } else { 0 },
            eps_mul: ex.eps_mul,
            e_mul_avg: ex.e_mul_avg,
            e_op_avg: ex.e_op_avg,
            eps_definition: "mean |code - a*b| over the 256 uniformly weighted pairs".into(),
        },
    )?;
    ctx.manifest.output(&sp);
    println!(
        "{name}: eps_mul {:.3} LSB, E_mul {:.3} fJ, E_op {:.3} fJ",
        ex.eps_mul,
        ex.e_mul_avg * 1e15,
        ex.e_op_avg * 1e15
    );
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SelectionFile {
    pub selection: Selection,
    pub n_mc: usize,
    pub seed: u64,
    pub corners_evaluated: usize,
    pub failures: Vec<CornerFailure>,
}

pub fn corner_row(m: &CornerMetrics) -> Vec<String> {
    vec![
        fmt_f64(m.config.tau0),
        fmt_f64(m.config.v_dac0),
        fmt_f64(m.config.v_dac_fs),
        fmt_f64(m.eps_mul),
        fmt_f64(m.e_mul),
        fmt_f64(m.fom),
        fmt_f64(m.sigma_max),
    ]
}

fn explore(ctx: &mut Ctx<'_>, model: &Option<PathBuf>, n_mc: Option<usize>) -> Result<()> {
    let mf = ctx.load_model(model)?;
    if let Some(n) = n_mc {
        ctx.cfg.n_mc_sweep = n;
        ctx.manifest.config.n_mc_sweep = n;
    }
    let n = ctx.cfg.n_mc_sweep;
    let grid = ctx.cfg.corners.clone();
    let seed = ctx.cli.seed;
    let sweep = ctx
        .manifest
        .time("sweep", || sweep_corners(&grid, &mf.models, n, seed))?;
    for f in &sweep.failures {
        eprintln!(
            "skipped corner ({:e} s, {} V, {} V): {}",
            f.tau0, f.v_dac0, f.v_dac_fs, f.reason
        );
    }
    let selection = select_corners(&sweep.metrics)?;
    let cp = ctx.path("corners.csv");
    write_csv(&cp, &CORNERS_HEADER, sweep.metrics.iter().map(corner_row))?;
    ctx.manifest.output(&cp);
    let sp = ctx.path("selected.json");
    write_json(
        &sp,
        &SelectionFile {
            selection: selection.clone(),
            n_mc: n,
            seed,
            corners_evaluated: sweep.metrics.len(),
            failures: sweep.failures.clone(),
        },
    )?;
    ctx.manifest.output(&sp);
    println!("{} corners evaluated", sweep.metrics.len());
    for (name, m) in selection.named() {
        println!(
            "{name:>9}: tau0 {:.3} ns, V_DAC0 {:.3} V, V_DACFS {:.3} V, eps {:.3} LSB, E_mul {:.3} fJ, sigma_max {:.3} mV",
            m.config.tau0 * 1e9,
            m.config.v_dac0,
            m.config.v_dac_fs,
            m.eps_mul,
            m.e_mul * 1e15,
            m.sigma_max * 1e3
        );
    }
    Ok(())
}

fn chosen_corners(
    ctx: &mut Ctx<'_>,
    corner: &Option<String>,
) -> Result<Vec<(String, CircuitConfig)>> {
    let sel = ctx.load_selection()?;
    let names: Vec<&str> = match corner.as_deref() {
        None | Some("all") => CORNER_NAMES.to_vec(),
        Some(n) => vec![n],
    };
    names
        .into_iter()
        .map(|n| {
            sel.selection
                .get(n)
                .map(|m| (n.to_string(), m.config))
                .ok_or_else(|| {
                    Error::usage(format!(
                        "unknown corner '{n}'; expected fom, power, variation or all"
                    ))
                })
        })
        .collect()
}

pub fn pvt_rows(r: &PvtSweepResult) -> impl Iterator<Item = Vec<String>> + '_ {
    r.points.iter().map(move |p| {
        vec![
            r.axis.name().to_string(),
            fmt_f64(p.value),
            p.eps_mul.map(fmt_f64).unwrap_or_default(),
            p.error.clone().unwrap_or_default(),
        ]
    })
}

fn pvt(ctx: &mut Ctx<'_>, model: &Option<PathBuf>, corner: &Option<String>) -> Result<()> {
    let mf = ctx.load_model(model)?;
    let corners = chosen_corners(ctx, corner)?;
    let (va, ta) = (ctx.cfg.v_dd_axis.clone(), ctx.cfg.temp_axis.clone());
    for (name, cfg) in corners {
        let (v, t) = ctx.manifest.time(&format!("pvt_{name}"), || {
            pvt_sweep(&cfg, &va, &ta, &mf.models)
        })?;
        let p = ctx.path(&format!("pvt_{name}.csv"));
        write_csv(&p, &PVT_HEADER, pvt_rows(&v).chain(pvt_rows(&t)))?;
        ctx.manifest.output(&p);
        println!(
            "{name:>9}: eps spread over V_DD {:.3} LSB, over T {:.3} LSB",
            v.spread(),
            t.spread()
        );
    }
    Ok(())
}

fn mc(
    ctx: &mut Ctx<'_>,
    model: &Option<PathBuf>,
    corner: &Option<String>,
    n_mc: Option<usize>,
) -> Result<()> {
    let mf = ctx.load_model(model)?;
    if let Some(n) = n_mc {
        ctx.cfg.n_mc_final = n;
        ctx.manifest.config.n_mc_final = n;
    }
    let n = ctx.cfg.n_mc_final;
    let corners = chosen_corners(ctx, corner)?;
    for (k, (name, cfg)) in corners.into_iter().enumerate() {
        let seed = mix(ctx.cli.seed, k as u64);
        let rows = ctx.manifest.time(&format!("mc_{name}"), || {
            mismatch_mc(&cfg, n, seed, &mf.models)
        })?;
        let p = ctx.path(&format!("mc_{name}.csv"));
        write_csv(
            &p,
            &MC_HEADER,
            rows.iter().map(|r| {
                vec![
                    r.a.to_string(),
                    r.b.to_string(),
                    fmt_f64(r.mean_code),
                    fmt_f64(r.sigma_code),
                    fmt_f64(r.sigma_analog),
                    fmt_f64(r.sigma_model),
                ]
            }),
        )?;
        ctx.manifest.output(&p);
        let worst = rows
            .iter()
            .max_by(|a, b| a.sigma_analog.total_cmp(&b.sigma_analog))
            .unwrap();
        let (ma, mb) = max_discharge_pair();
        let at_max = rows.iter().find(|r| r.a == ma && r.b == mb).unwrap();
        println!(
            "{name:>9}: worst-case analog sigma {:.3} mV at ({}, {}); at ({ma}, {mb}) {:.3} mV vs model {:.3} mV",
            worst.sigma_analog * 1e3,
            worst.a,
            worst.b,
            at_max.sigma_analog * 1e3,
            at_max.sigma_model * 1e3
        );
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AccuracyFile {
    pub real_accuracy: f64,
    pub rows: Vec<AccuracyRow>,
    pub task: imc_core::dnn::SyntheticTask,
}

fn dnn(ctx: &mut Ctx<'_>, model: &Option<PathBuf>, stochastic: bool) -> Result<()> {
    let mf = ctx.load_model(model)?;
    let corners = chosen_corners(ctx, &None)?;
    let spec = ctx.cfg.task.clone();
    let task = ctx.manifest.time("task", || make_task(&spec))?;
    let q = quantize_task(&task)?;
    let mut backends = vec![MulBackend::Exact];
    for (name, cfg) in &corners {
        let cal = calibrate_adc(cfg, &mf.models)?;
        let lut = Lut::from_multiplier(name, &Multiplier::new(*cfg, &mf.models, cal)?)?;
        let p = ctx.path(&format!("lut_{name}.csv"));
        write_csv(
            &p,
            &LUT_HEADER,
            (0..16usize).flat_map(|a| {
                let lut = &lut;
                (0..16usize)
                    .map(move |b| vec![a.to_string(), b.to_string(), lut.codes[a][b].to_string()])
            }),
        )?;
        ctx.manifest.output(&p);
        backends.push(MulBackend::Lut(lut));
    }
    if stochastic {
        for (k, (name, cfg)) in corners.iter().enumerate() {
            backends.push(MulBackend::Stochastic(Stochastic {
                name: format!("{name}_mc"),
                cfg: *cfg,
                cal: calibrate_adc(cfg, &mf.models)?,
                models: mf.models.clone(),
                seed: mix(ctx.cli.seed, k as u64),
            }));
        }
    }
    let rows = ctx
        .manifest
        .time("inference", || infer_and_score(&q, &backends))?;
    let ap = ctx.path("accuracy.csv");
    write_csv(
        &ap,
        &ACCURACY_HEADER,
        rows.iter()
            .map(|r| vec![r.backend.clone(), fmt_f64(r.top1), fmt_f64(r.top_k)]),
    )?;
    ctx.manifest.output(&ap);
    let jp = ctx.path("accuracy.json");
    write_json(
        &jp,
        &AccuracyFile {
            real_accuracy: task.real_accuracy,
            rows: rows.clone(),
            task: spec,
        },
    )?;
    ctx.manifest.output(&jp);
    println!("real-valued top-1 {:.3}", task.real_accuracy);
    for r in &rows {
        println!(
            "{:>14}: top-1 {:.3}, top-{} {:.3}",
            r.backend, r.top1, r.k, r.top_k
        );
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BenchFile {
    pub corner: CircuitConfig,
    pub sweep: Timing,
    pub mc: Timing,
    pub oracle_sweep: OracleSweep,
    pub model_eps_mul: f64,
}

fn bench(ctx: &mut Ctx<'_>, model: &Option<PathBuf>, corner: &CornerArgs) -> Result<()> {
    let mf = ctx.load_model(model)?;
    let (_, cfg) = resolve_corner(ctx, corner, &mf)?;
    let draws = ctx.cfg.bench_draws;
    // Single worker: both routes run on this thread.
    let (sweep, oracle) = ctx
        .manifest
        .time("sweep", || bench_sweep(&cfg, &mf.models, &mf.params))?;
    let mc = ctx.manifest.time("mc", || {
        bench_mc(&cfg, &mf.models, &mf.params, draws, ctx.cli.seed)
    })?;
    let cal = calibrate_adc(&cfg, &mf.models)?;
    let model_eps = exhaustive_error(&cfg, &mf.models, &cal, Mode::Nominal, 0)?.eps_mul;
    for t in [&sweep, &mc] {
        println!(
            "{}: fitted model {:.3e} s, oracle {:.3e} s, speedup {:.1}x",
            t.task, t.fast_s, t.oracle_s, t.speedup
        );
    }
    println!(
        "eps_mul: fitted model {:.3} LSB, oracle {:.3} LSB",
        model_eps, oracle.eps_mul
    );
    let p = ctx.path("bench.json");
    write_json(
        &p,
        &BenchFile {
            corner: cfg,
            sweep,
            mc,
            oracle_sweep: oracle,
            model_eps_mul: model_eps,
        },
    )?;
    ctx.manifest.output(&p);
    Ok(())
}

fn report(ctx: &mut Ctx<'_>) -> Result<()> {
    let mut md = String::from("# Results summary\n");
    let fp = ctx.path("fit_report.json");
    if fp.is_file() {
        ctx.manifest.input(&fp);
        let f: FitReportFile = read_json(&fp)?;
        md.push_str(
            "\n## Model fit RMS\n\n| model | training | holdout | unit |\n|---|---|---|---|\n",
        );
        for (k, e) in &f.training.entries {
            let h = f
                .holdout
                .as_ref()
                .and_then(|h| h.get(k))
                .map_or("-".to_string(), |h| format!("{:.4}", h.rms));
            md.push_str(&format!("| {k} | {:.4} | {h} | {} |\n", e.rms, e.unit));
        }
    }
    let sp = ctx.path("selected.json");
    if sp.is_file() {
        ctx.manifest.input(&sp);
        let s: SelectionFile = read_json(&sp)?;
        md.push_str(&format!(
            "\n## Selected corners ({} evaluated)\n\n| corner | tau0 (ns) | V_DAC,0 (V) | V_DAC,FS (V) | eps_mul (LSB) | E_mul (fJ) | sigma_max (mV) |\n|---|---|---|---|---|---|---|\n",
            s.corners_evaluated
        ));
        for (n, m) in s.selection.named() {
            md.push_str(&format!(
                "| {n} | {:.3} | {:.3} | {:.3} | {:.3} | {:.3} | {:.3} |\n",
                m.config.tau0 * 1e9,
                m.config.v_dac0,
                m.config.v_dac_fs,
                m.eps_mul,
                m.e_mul * 1e15,
                m.sigma_max * 1e3
            ));
        }
    }
    let mut pvt_done = false;
    for n in CORNER_NAMES {
        let p = ctx.path(&format!("pvt_{n}.csv"));
        if !p.is_file() {
            continue;
        }
        if !pvt_done {
            md.push_str("\n## PVT sweeps (eps_mul in LSB)\n\n| corner | axis | value | eps_mul |\n|---|---|---|---|\n");
            pvt_done = true;
        }
        ctx.manifest.input(&p);
        for r in read_csv(&p, &PVT_HEADER)? {
            let v = imc_core::io::parse_f64(&p, &r[1])?;
            let e = imc_core::io::parse_f64(&p, &r[2])?;
            md.push_str(&format!("| {n} | {} | {v} | {e:.3} |\n", r[0]));
        }
    }
    let mut mc_done = false;
    for n in CORNER_NAMES {
        let p = ctx.path(&format!("mc_{n}.csv"));
        if !p.is_file() {
            continue;
        }
        if !mc_done {
            md.push_str("\n## Mismatch MC\n\n| corner | worst analog sigma (mV) | at pair | sigma at (15,15) (mV) | model (mV) |\n|---|---|---|---|---|\n");
            mc_done = true;
        }
        ctx.manifest.input(&p);
        let rows = read_csv(&p, &MC_HEADER)?;
        let num = |s: &str| imc_core::io::parse_f64(&p, s);
        let mut worst = (f64::NEG_INFINITY, String::new());
        let mut at_max = (0.0, 0.0);
        for r in &rows {
            let s = num(&r[4])?;
            if s > worst.0 {
                worst = (s, format!("({}, {})", r[0], r[1]));
            }
            if r[0] == "15" && r[1] == "15" {
                at_max = (s, num(&r[5])?);
            }
        }
        md.push_str(&format!(
            "| {n} | {:.4} | {} | {:.4} | {:.4} |\n",
            worst.0 * 1e3,
            worst.1,
            at_max.0 * 1e3,
            at_max.1 * 1e3
        ));
    }
    let ap = ctx.path("accuracy.csv");
    if ap.is_file() {
        ctx.manifest.input(&ap);
        md.push_str("\n## Classifier accuracy\n\n| backend | top-1 | top-K |\n|---|---|---|\n");
        for r in read_csv(&ap, &ACCURACY_HEADER)? {
            let t1 = imc_core::io::parse_f64(&ap, &r[1])?;
            let tk = imc_core::io::parse_f64(&ap, &r[2])?;
            md.push_str(&format!("| {} | {t1:.4} | {tk:.4} |\n", r[0]));
        }
    }
    let bp = ctx.path("bench.json");
    if bp.is_file() {
        ctx.manifest.input(&bp);
        let b: BenchFile = read_json(&bp)?;
        md.push_str(
            "\n## Speed\n\n| task | fitted model (s) | oracle (s) | speedup |\n|---|---|---|---|\n",
        );
        for t in [&b.sweep, &b.mc] {
            md.push_str(&format!(
                "| {} | {:.3e} | {:.3e} | {:.1} |\n",
                t.task, t.fast_s, t.oracle_s, t.speedup
            ));
        }
    }
    let p = ctx.path("report.md");
    fs::write(&p, &md).map_err(|source| Error::Io {
        path: p.clone(),
        source,
    })?;
    ctx.manifest.output(&p);
    print!("{md}");
    Ok(())
}
