use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use wxgen::baseline::{baseline_generate, BaselineRequest};
use wxgen::config::RunConfig;
use wxgen::data::{fit_standardization, make_windows, parse_weather_csv, split_by_date, to_model_space, WeatherSeries};
use wxgen::evaluate::{
    compare_methods, parse_truth_yield_csv, parse_yield_csv, smoothed_abs_error, write_yield_comparison, yield_metrics,
    yield_table, Comparison, TABLE_COLUMNS,
};
use wxgen::met::write_met_file;
use wxgen::model::{ArchitectureSpec, WeatherNet};
use wxgen::sampler::{generate as sample, parse_ensemble_csv, Ensemble, GenerationRequest};
use wxgen::trainer::train as fit;

use crate::{ConfigArg, OutArgs, SampleArgs, TrainArgs};

fn load_config(arg: &ConfigArg) -> Result<RunConfig> {
    RunConfig::load(&arg.config).with_context(|| format!("reading config {}", arg.config.display()))
}

/// Loads the config and applies `--out`: every output of the run moves
/// into that directory under its default file name.
fn load_with_out(args: &OutArgs) -> Result<RunConfig> {
    let mut cfg = load_config(&args.config)?;
    if let Some(out) = &args.out {
        cfg.paths.output_dir = out.clone();
        cfg.paths.checkpoint = out.join("model.ckpt");
        cfg.paths.history = out.join("history.csv");
        cfg.training.checkpoint_path = Some(cfg.paths.checkpoint.clone());
        cfg.evaluation.generative_ensemble = out.join("generative.csv");
        cfg.evaluation.conventional_ensemble = out.join("conventional.csv");
    }
    Ok(cfg)
}

fn read_weather(path: &Path, cfg: &RunConfig) -> Result<WeatherSeries> {
    let bytes = fs::read(path).with_context(|| format!("reading weather data {}", path.display()))?;
    let mut series = parse_weather_csv(&bytes).with_context(|| format!("parsing {}", path.display()))?;
    series.location = cfg.location.clone();
    Ok(series)
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn plan_line(spec: &ArchitectureSpec) -> String {
    format!(
        "receptive_field={} T={} t0={} params={}",
        spec.plan.receptive_field(),
        spec.window_len(),
        spec.t0(),
        wxgen::model::param_count(spec)
    )
}

pub fn inspect(arg: &ConfigArg) -> Result<()> {
    let cfg = load_config(arg)?;
    let spec = cfg.architecture.spec().context("planning architecture")?;
    println!(
        "l={} m={} {}",
        spec.plan.base_filter,
        spec.plan.dilated_layers,
        plan_line(&spec)
    );
    println!(
        "horizon={} padding={} epsilon={} channels={}",
        spec.horizon(),
        spec.plan.padding(),
        spec.epsilon,
        spec.channels
    );
    for layer in spec.layers() {
        println!(
            "{:<12} in={:<3} out={:<3} width={} dilation={:<4} bias={:<5} params={}",
            layer.name,
            layer.in_channels,
            layer.out_channels,
            layer.width,
            layer.dilation,
            layer.bias,
            layer.param_count()
        );
    }
    Ok(())
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let mut cfg = load_with_out(&args.base)?;
    if let Some(seed) = args.seed {
        cfg.training.seed = seed;
    }
    if let Some(epochs) = args.epochs {
        cfg.training.epochs = epochs;
    }
    let spec = cfg.architecture.spec().context("planning architecture")?;
    println!("{}", plan_line(&spec));

    let data = read_weather(&cfg.paths.data, &cfg)?;
    let (train_part, _) = split_by_date(&data, cfg.data.split_date).context("splitting at split_date")?;
    let series = to_model_space(&train_part, cfg.data.zero_floor);
    let stats = fit_standardization(&series).context("fitting standardization")?;
    let mut net = WeatherNet::build(&spec, cfg.training.seed)?;
    net.set_standardization(stats, cfg.data.zero_floor);
    let windows = make_windows(&series, spec.window_len(), spec.t0()).context("cutting training windows")?;
    println!(
        "training days={} windows={} epochs={} batch_size={}",
        series.len(),
        windows.len(),
        cfg.training.epochs,
        cfg.training.batch_size
    );

    create_parent(&cfg.paths.checkpoint)?;
    create_parent(&cfg.paths.history)?;
    let history = fit(&mut net, &windows, &cfg.training, |r| {
        eprintln!("{}", r.progress_line())
    })
    .context("training")?;
    let file =
        fs::File::create(&cfg.paths.history).with_context(|| format!("writing {}", cfg.paths.history.display()))?;
    let mut w = BufWriter::new(file);
    history.write_csv(&mut w)?;
    w.flush()?;
    let saved = WeatherNet::load(&cfg.paths.checkpoint)?;
    println!(
        "best_epoch={} best_loss={:.6} checkpoint={} id={}",
        history.best_epoch().unwrap_or(0),
        history.best_loss().unwrap_or(f64::NAN),
        cfg.paths.checkpoint.display(),
        saved.checkpoint_id()
    );
    Ok(())
}

fn write_ensemble(ens: &Ensemble, path: &Path, met_dir: Option<PathBuf>) -> Result<()> {
    create_parent(path)?;
    let file = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    let mut w = BufWriter::new(file);
    ens.write_csv(&mut w)?;
    w.flush()?;
    if let Some(dir) = met_dir {
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let width = ens.len().to_string().len().max(4);
        for (k, m) in ens.members().iter().enumerate() {
            let p = dir.join(format!("member_{:0width$}.met", k + 1));
            write_met_file(m, &p).with_context(|| format!("writing {}", p.display()))?;
        }
    }
    println!(
        "members={} days={} start={} end={} file={}",
        ens.len(),
        ens.horizon(),
        ens.start_date(),
        ens.end_date(),
        path.display()
    );
    Ok(())
}

fn met_dir(cfg: &RunConfig, method: &str) -> Option<PathBuf> {
    cfg.generation
        .write_met
        .then(|| cfg.paths.output_dir.join(format!("{method}_met")))
}

pub fn generate(args: &SampleArgs) -> Result<()> {
    let mut cfg = load_with_out(&args.base)?;
    if let Some(seed) = args.seed {
        cfg.generation.master_seed = seed;
    }
    let spec = cfg.architecture.spec().context("planning architecture")?;
    let ckpt = &cfg.paths.checkpoint;
    let net = WeatherNet::load(ckpt).with_context(|| format!("loading checkpoint {}", ckpt.display()))?;
    if net.spec() != &spec {
        bail!(
            "checkpoint {} was trained for horizon {} (T={} t0={}, channels {}), but the config asks for horizon {} \
             (T={} t0={}, channels {}); train a model for this configuration",
            ckpt.display(),
            net.horizon(),
            net.window_len(),
            net.spec().t0(),
            net.spec().channels,
            spec.horizon(),
            spec.window_len(),
            spec.t0(),
            spec.channels
        );
    }
    let data = read_weather(&cfg.paths.data, &cfg)?;
    let start = cfg.generation.start_date;
    let last_observed = start.pred_opt().context("start date has no predecessor")?;
    let observed = data
        .tail_ending(last_observed, spec.t0())
        .with_context(|| format!("taking {} conditioning days ending {last_observed}", spec.t0()))?;
    let req = GenerationRequest {
        conditioning: to_model_space(&observed, net.zero_floor()),
        horizon: spec.horizon(),
        n_samples: cfg.generation.n_samples,
        master_seed: cfg.generation.master_seed,
        start_date: start,
        location: cfg.location.clone(),
    };
    let ens = sample(&net, &req).context("generating")?;
    write_ensemble(&ens, &cfg.evaluation.generative_ensemble, met_dir(&cfg, "generative"))
}

pub fn baseline(args: &SampleArgs) -> Result<()> {
    let mut cfg = load_with_out(&args.base)?;
    if let Some(seed) = args.seed {
        cfg.generation.master_seed = seed;
    }
    let history = read_weather(&cfg.paths.data, &cfg)?;
    let req = BaselineRequest {
        history: &history,
        target_start: cfg.generation.start_date,
        horizon: cfg.architecture.horizon,
        years_back: cfg.years_back,
        n_samples: cfg.generation.n_samples,
        master_seed: cfg.generation.master_seed,
    };
    let ens = baseline_generate(&req).context("resampling history")?;
    write_ensemble(
        &ens,
        &cfg.evaluation.conventional_ensemble,
        met_dir(&cfg, "conventional"),
    )
}

fn read_ensemble(path: &Path) -> Result<Ensemble> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_ensemble_csv(&text).with_context(|| format!("parsing {}", path.display()))
}

fn print_comparison(what: &str, c: &Comparison) {
    println!(
        "{what}: generative better in {}/{}, conventional better in {}, ties {}",
        c.a_wins,
        c.total(),
        c.b_wins,
        c.ties
    );
    for k in &c.b_better {
        println!("  conventional better: {k}");
    }
}

pub fn evaluate(args: &OutArgs) -> Result<()> {
    let cfg = load_with_out(args)?;
    let ev = &cfg.evaluation;
    let methods: Vec<(&str, &PathBuf)> = [
        ("generative", &ev.generative_ensemble),
        ("conventional", &ev.conventional_ensemble),
    ]
    .into_iter()
    .filter(|(_, p)| p.exists())
    .collect();
    let mut missing: Vec<String> = Vec::new();
    if methods.is_empty() {
        missing.push(format!("ensemble {}", ev.generative_ensemble.display()));
        missing.push(format!("ensemble {}", ev.conventional_ensemble.display()));
    }
    if !ev.truth.exists() {
        missing.push(format!("truth {}", ev.truth.display()));
    }
    let yields = [&ev.generative_yields, &ev.conventional_yields, &ev.truth_yields];
    if yields.iter().any(|y| y.is_some()) {
        for (name, y) in ["generative_yields", "conventional_yields", "truth_yields"]
            .iter()
            .zip(yields)
        {
            match y {
                None => missing.push(format!("{name} (not configured)")),
                Some(p) if !p.exists() => missing.push(format!("{name} {}", p.display())),
                Some(_) => {}
            }
        }
    }
    if !missing.is_empty() {
        bail!("missing evaluation inputs:\n  {}", missing.join("\n  "));
    }

    let truth = read_weather(&ev.truth, &cfg)?;
    let out = &cfg.paths.output_dir;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut metrics = Vec::new();
    for (method, path) in &methods {
        let ens = read_ensemble(path)?;
        let mut all = std::collections::BTreeMap::new();
        for &period in &ev.periods {
            let table =
                smoothed_abs_error(&ens, &truth, period).with_context(|| format!("{method} {period} errors"))?;
            let p = out.join(format!("{method}_{period}.csv"));
            let mut w = BufWriter::new(fs::File::create(&p).with_context(|| format!("writing {}", p.display()))?);
            table.write_csv(&mut w)?;
            w.flush()?;
            let cells: Vec<String> = TABLE_COLUMNS
                .iter()
                .zip(table.summary)
                .map(|(c, v)| format!("{c}={v:.3}"))
                .collect();
            println!("{method} {period} rows={} {}", table.rows.len(), cells.join(" "));
            all.extend(table.metrics());
        }
        metrics.push(all);
    }
    if let [a, b] = metrics.as_slice() {
        print_comparison("weather", &compare_methods(a, b)?);
    }

    if let (Some(g), Some(c), Some(t)) = (&ev.generative_yields, &ev.conventional_yields, &ev.truth_yields) {
        let read = |p: &PathBuf| fs::read(p).with_context(|| format!("reading {}", p.display()));
        let truth_y = parse_truth_yield_csv(&read(t)?).with_context(|| format!("parsing {}", t.display()))?;
        let gen = yield_table(
            &parse_yield_csv(&read(g)?).with_context(|| format!("parsing {}", g.display()))?,
            &truth_y,
        )?;
        let conv = yield_table(
            &parse_yield_csv(&read(c)?).with_context(|| format!("parsing {}", c.display()))?,
            &truth_y,
        )?;
        let p = out.join("yield_errors.csv");
        let mut w = BufWriter::new(fs::File::create(&p).with_context(|| format!("writing {}", p.display()))?);
        write_yield_comparison("Generative", &gen, "Conventional", &conv, &mut w)?;
        w.flush()?;
        print_comparison("yields", &compare_methods(&yield_metrics(&gen), &yield_metrics(&conv))?);
    }
    Ok(())
}
