use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, Normal};

fn wxgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wxgen"))
        .args(args)
        .output()
        .expect("run wxgen")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn inspect(config: &str) -> String {
    let path = configs_dir().join(config);
    let o = wxgen(&["inspect", "--config", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    stdout(&o)
}

#[test]
fn shipped_configs_plan_the_expected_networks() {
    let s1 = inspect("scenario1.conf");
    assert!(s1.contains("T=2402 t0=2037 params=50682"), "{s1}");
    assert!(s1.contains("padding=364"), "{s1}");
    let s2 = inspect("scenario2.conf");
    assert!(s2.contains("receptive_field=3125 T=3126 t0=2031 params=37442"), "{s2}");
    assert!(inspect("toy.conf").contains("params=87"));
}

/// Four years of plausible weather from 2015-01-01 with a seasonal cycle.
fn write_synthetic(path: &Path, days: usize) {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, 2.0).unwrap();
    let start = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
    let mut text = String::from("date,radn,mint,maxt,rain\n");
    for i in 0..days {
        let s = (i as f64 * std::f64::consts::TAU / 365.25).cos();
        let radn = Gamma::new(12.0, (17.0 + 8.0 * s) / 12.0).unwrap().sample(&mut rng);
        let mint = 8.0 + 6.0 * s + noise.sample(&mut rng);
        let maxt = mint + Gamma::new(9.0, (10.0 + 3.0 * s) / 9.0).unwrap().sample(&mut rng);
        let rain = if rng.random::<f64>() < 0.5 {
            0.0
        } else {
            Gamma::new(0.7, 5.0).unwrap().sample(&mut rng)
        };
        let date = start + chrono::Days::new(i as u64);
        text.push_str(&format!("{date},{radn:.3},{mint:.3},{maxt:.3},{rain:.3}\n"));
    }
    fs::write(path, text).unwrap();
}

struct Run {
    dir: tempfile::TempDir,
}

impl Run {
    fn new(horizon: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        write_synthetic(&dir.path().join("weather.csv"), 4 * 365 + 60);
        let r = Run { dir };
        r.write_config("run.conf", horizon);
        r
    }

    fn write_config(&self, name: &str, horizon: usize) {
        let text = format!(
            "[paths]\ndata = weather.csv\noutput_dir = out\n\
             [architecture]\nl = 3\nm = 3\nchannels = (4,8,8,8,2)\nhorizon = {horizon}\n\
             [data]\nsplit_date = 2018-12-31\n\
             [training]\nepochs = 3\nbatch_size = 16\nseed = 5\n\
             [generation]\nn_samples = 6\nmaster_seed = 9\nwrite_met = yes\n\
             [baseline]\nyears_back = 3\n\
             [evaluation]\nperiods = day,week\n\
             [location]\nname = Testville\nlatitude = -35.5\n"
        );
        fs::write(self.dir.path().join(name), text).unwrap();
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn run(&self, args: &[&str]) -> Output {
        let config = self.path("run.conf");
        let mut all: Vec<&str> = args.to_vec();
        all.extend(["--config", config.to_str().unwrap()]);
        wxgen(&all)
    }

    fn ok(&self, args: &[&str]) -> String {
        let o = self.run(args);
        assert!(o.status.success(), "wxgen {args:?} failed: {}", stderr(&o));
        stdout(&o)
    }
}

#[test]
fn train_generate_baseline_evaluate_round_trip() {
    let r = Run::new(14);
    let out = r.ok(&["train"]);
    assert!(out.contains("T=28 t0=14 params=650"), "{out}");
    assert!(out.contains("best_epoch="), "{out}");
    assert!(r.path("out/model.ckpt").exists());
    assert_eq!(
        fs::read_to_string(r.path("out/history.csv")).unwrap().lines().count(),
        4
    );

    let gen = r.ok(&["generate"]);
    assert!(
        gen.contains("members=6 days=14 start=2019-01-01 end=2019-01-14"),
        "{gen}"
    );
    let met = fs::read_to_string(r.path("out/generative_met/member_0001.met")).unwrap();
    assert!(met.contains("! location: Testville"));
    assert_eq!(fs::read_dir(r.path("out/generative_met")).unwrap().count(), 6);

    let base = r.ok(&["baseline"]);
    assert!(base.contains("members=6 days=14 start=2019-01-01"), "{base}");

    let eval = r.ok(&["evaluate"]);
    for f in [
        "generative_day.csv",
        "generative_week.csv",
        "conventional_day.csv",
        "conventional_week.csv",
    ] {
        assert!(r.path("out").join(f).exists(), "missing {f}");
    }
    assert!(eval.contains("generative day rows=14"), "{eval}");
    assert!(eval.contains("conventional week rows=2"), "{eval}");
    assert!(eval.contains("weather: generative better in"), "{eval}");
}

#[test]
fn evaluate_compares_yield_files() {
    let r = Run::new(14);
    r.ok(&["baseline"]);
    let header = "member,crop,slot,yield_kg_ha\n";
    let gen = "1,wheat,2019,3000\n2,wheat,2019,3300\n1,barley,2019,2500\n2,barley,2019,2500\n";
    let conv = "1,wheat,2019,2000\n2,wheat,2019,4000\n1,barley,2019,2400\n2,barley,2019,2600\n";
    fs::write(r.path("gen_y.csv"), format!("{header}{gen}")).unwrap();
    fs::write(r.path("conv_y.csv"), format!("{header}{conv}")).unwrap();
    fs::write(
        r.path("truth_y.csv"),
        "crop,slot,yield_kg_ha\nwheat,2019,3100\nbarley,2019,2500\n",
    )
    .unwrap();
    let mut conf = fs::read_to_string(r.path("run.conf")).unwrap();
    conf.push_str(
        "[evaluation]\ngenerative_yields = gen_y.csv\nconventional_yields = conv_y.csv\ntruth_yields = truth_y.csv\n",
    );
    fs::write(r.path("run.conf"), conf).unwrap();

    let out = r.ok(&["evaluate"]);
    // Absolute errors, generative: wheat 100 and 200, barley 0 and 0.
    // Conventional: wheat 1100 and 900, barley 100 and 100.
    assert!(
        out.contains("yields: generative better in 3/4, conventional better in 0, ties 1"),
        "{out}"
    );
    let table = fs::read_to_string(r.path("out/yield_errors.csv")).unwrap();
    assert_eq!(
        table,
        "slot,method,barley mean,barley std,wheat mean,wheat std\n\
         2019,Generative,0,0,150,50\n2019,Conventional,100,0,1000,100\n"
    );
}

#[test]
fn reruns_are_byte_identical() {
    let r = Run::new(14);
    let id = |s: &str| s.split("id=").nth(1).unwrap().trim().to_string();
    let first = id(&r.ok(&["train"]));
    let ckpt = fs::read(r.path("out/model.ckpt")).unwrap();
    let history = fs::read(r.path("out/history.csv")).unwrap();
    r.ok(&["generate"]);
    let ens = fs::read(r.path("out/generative.csv")).unwrap();

    assert_eq!(id(&r.ok(&["train"])), first);
    assert_eq!(fs::read(r.path("out/model.ckpt")).unwrap(), ckpt);
    assert_eq!(fs::read(r.path("out/history.csv")).unwrap(), history);
    r.ok(&["generate"]);
    assert_eq!(fs::read(r.path("out/generative.csv")).unwrap(), ens);

    r.ok(&["generate", "--seed", "10"]);
    assert_ne!(fs::read(r.path("out/generative.csv")).unwrap(), ens);
}

#[test]
fn out_flag_redirects_outputs() {
    let r = Run::new(14);
    let alt = r.path("elsewhere");
    r.ok(&["train", "--epochs", "1", "--out", alt.to_str().unwrap()]);
    assert!(alt.join("model.ckpt").exists());
    assert!(!r.path("out/model.ckpt").exists());
    assert_eq!(fs::read_to_string(alt.join("history.csv")).unwrap().lines().count(), 2);
}

#[test]
fn generate_refuses_a_checkpoint_for_another_horizon() {
    let r = Run::new(14);
    r.ok(&["train", "--epochs", "1"]);
    r.write_config("run.conf", 10);
    let o = r.run(&["generate"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("horizon 14") && err.contains("horizon 10"), "{err}");
    assert!(!r.path("out/generative.csv").exists());
}

#[test]
fn failures_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    fs::write(
        &conf,
        "[paths]\ndata = x.csv\n[architecture]\nl = 2\nm = 3\nchannels = (2,4,4,4,2)\nhorizon = 365\n\
         [data]\nsplit_date = 2020-01-01\n",
    )
    .unwrap();
    let o = wxgen(&["inspect", "-c", conf.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("horizon 365"), "{}", stderr(&o));

    let o = wxgen(&["train", "-c", conf.to_str().unwrap()]);
    assert!(!o.status.success());

    let o = wxgen(&["inspect", "-c", dir.path().join("missing.conf").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error: reading config"), "{}", stderr(&o));

    let r = Run::new(14);
    let o = r.run(&["evaluate"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("missing evaluation inputs"), "{}", stderr(&o));
}
