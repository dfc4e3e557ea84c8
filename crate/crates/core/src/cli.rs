//! Command-line runner.
//!
//! One subcommand per experiment. Each run writes its artifacts plus a
//! `manifest.json` (resolved config, seed, artifact list) into the output
//! directory. Exit status is 0 on success, 1 for invalid input and 2 for a
//! numerical failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{in_section, Format, RunConfig};
use crate::dynamics::{adiabaticity_parameter, dressed_frame, evolve, photons_per_pulse, JumpOptions};
use crate::error::{Error, Result};
use crate::photonstats::{
    estimate_g2, simulate_hbt, simulate_hom, CoincidenceHistogram, HomResult, Measured, Polarization,
};
use crate::pulse::{instantaneous_detuning, separation_for_gdd, treacy_gdd};
use crate::spectra::{fit_voigt, synth_spectrum, FitOptions, Spectrum};
use crate::sweep::{chirp_area_map, power_scan, robustness_trace, ScanSpec};

#[derive(Debug, Parser)]
#[command(name = "qdrap", version, about = "Chirped-pulse quantum-dot excitation and photon statistics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON configuration file, merged over the bundled defaults if those are requested.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Maximum number of worker threads.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Start from the bundled configuration of the published experiment.
    #[arg(long = "paper-defaults", global = true)]
    pub bundled_defaults: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Power scan of the unchirped pulse.
    Rabi,
    /// Power scan of the chirped pulse (one curve per configured chirp).
    Rap,
    /// Excitation over the chirp x area grid.
    Map,
    /// Excitation under slow laser-power modulation.
    Trace,
    /// Field, trajectory and dressed-state curves of one pulse.
    Dressed,
    /// Grating-pair dispersion calculator.
    Gdd,
    /// Monte Carlo intensity-correlation measurement.
    Hbt,
    /// Monte Carlo two-photon interference measurement.
    Hom,
    /// g2(0) estimate from a stored histogram.
    G2,
    /// Synthesize and/or fit a Voigt spectrum.
    Spectrum,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Rabi => "rabi",
            Command::Rap => "rap",
            Command::Map => "map",
            Command::Trace => "trace",
            Command::Dressed => "dressed",
            Command::Gdd => "gdd",
            Command::Hbt => "hbt",
            Command::Hom => "hom",
            Command::G2 => "g2",
            Command::Spectrum => "spectrum",
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        2
    } else {
        1
    }
}

/// Parse `args`, run, report errors on stderr and return the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Resolve the configuration, run the subcommand and return the output
/// directory.
pub fn run(cli: &Cli) -> Result<PathBuf> {
    let mut cfg = RunConfig::load(cli.config.as_deref(), cli.bundled_defaults)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    if let Some(d) = &cli.out {
        cfg.output.dir = d.clone();
    }
    let threads = match cli.threads {
        Some(0) => return Err(Error::invalid("threads", "must be at least 1")),
        Some(n) => n,
        None => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid("threads", e.to_string()))?;
    pool.install(|| execute(cli.command, &cfg))
}

fn execute(command: Command, cfg: &RunConfig) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.output.dir)?;
    let mut out = Artifacts {
        dir: cfg.output.dir.clone(),
        format: cfg.output.format,
        written: Vec::new(),
    };
    match command {
        Command::Rabi => rabi(cfg, &mut out)?,
        Command::Rap => rap(cfg, &mut out)?,
        Command::Map => map(cfg, &mut out)?,
        Command::Trace => trace(cfg, &mut out)?,
        Command::Dressed => dressed(cfg, &mut out)?,
        Command::Gdd => gdd(cfg, &mut out)?,
        Command::Hbt => hbt(cfg, &mut out)?,
        Command::Hom => hom(cfg, &mut out)?,
        Command::G2 => g2(cfg, &mut out)?,
        Command::Spectrum => spectrum(cfg, &mut out)?,
    }
    // The output location is not part of the result; leaving it out keeps
    // manifests of identical runs byte-identical.
    let mut config = serde_json::to_value(cfg).expect("config serializes");
    if let Some(o) = config.get_mut("output").and_then(Value::as_object_mut) {
        o.remove("dir");
    }
    let manifest = json!({
        "tool": "qdrap",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": command.name(),
        "seed": cfg.seed,
        "format": cfg.output.format,
        "artifacts": out.written,
        "config": config,
    });
    out.json("manifest", &manifest)?;
    Ok(out.dir)
}

struct Artifacts {
    dir: PathBuf,
    format: Format,
    written: Vec<String>,
}

impl Artifacts {
    /// Tabular artifact rendered by `write` as CSV, stored as CSV or as a
    /// JSON table depending on the output format.
    fn table(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        match self.format {
            Format::Csv => self.put(&format!("{name}.csv"), &buf),
            Format::Json => {
                let text = String::from_utf8(buf).expect("CSV writers emit UTF-8");
                let mut s = serde_json::to_string_pretty(&csv_to_json(&text)?).expect("tables serialize");
                s.push('\n');
                self.put(&format!("{name}.json"), s.as_bytes())
            }
        }
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value).expect("results serialize");
        s.push('\n');
        self.put(&format!("{name}.json"), s.as_bytes())
    }

    fn put(&mut self, file: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.dir.join(file), bytes)?;
        if file != "manifest.json" {
            self.written.push(file.to_string());
        }
        Ok(())
    }
}

/// `# key=value` comment lines become `meta`, the first other line the
/// column names, the rest numeric rows.
pub fn csv_to_json(text: &str) -> Result<Value> {
    let mut meta = Map::new();
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            if let Some((k, v)) = c.trim().split_once('=') {
                let v = v.trim();
                let val = v.parse::<f64>().map(|x| json!(x)).unwrap_or_else(|_| json!(v));
                meta.insert(k.trim().to_string(), val);
            }
            continue;
        }
        match &columns {
            None => columns = Some(line.split(',').map(str::to_string).collect()),
            Some(_) => {
                let row = line
                    .split(',')
                    .map(|c| c.parse::<f64>().map_err(|_| Error::Parse(format!("`{c}` is not a number"))))
                    .collect::<Result<Vec<f64>>>()?;
                rows.push(row);
            }
        }
    }
    Ok(json!({ "meta": meta, "columns": columns.unwrap_or_default(), "rows": rows }))
}

/// Inverse of [`csv_to_json`].
pub fn json_to_csv(value: &Value) -> Result<String> {
    let bad = || Error::Parse("JSON table needs `columns` and `rows`".into());
    let mut s = String::new();
    if let Some(meta) = value.get("meta").and_then(Value::as_object) {
        for (k, v) in meta {
            match v {
                Value::String(t) => s += &format!("# {k}={t}\n"),
                other => s += &format!("# {k}={other}\n"),
            }
        }
    }
    let cols = value.get("columns").and_then(Value::as_array).ok_or_else(bad)?;
    let names: Vec<&str> = cols.iter().map(|c| c.as_str().ok_or_else(bad)).collect::<Result<_>>()?;
    s += &names.join(",");
    s.push('\n');
    for row in value.get("rows").and_then(Value::as_array).ok_or_else(bad)? {
        let vals: Vec<String> = row
            .as_array()
            .ok_or_else(bad)?
            .iter()
            .map(|v| v.as_f64().map(|x| x.to_string()).ok_or_else(bad))
            .collect::<Result<_>>()?;
        s += &vals.join(",");
        s.push('\n');
    }
    Ok(s)
}

/// Read a tabular input file as CSV text, converting JSON tables.
pub fn read_table(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        let v: Value = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        json_to_csv(&v)
    } else {
        Ok(text)
    }
}

fn scan_spec(cfg: &RunConfig, gdd_required: bool) -> Result<ScanSpec> {
    let scan = RunConfig::require("scan", &cfg.scan)?;
    let gdds = match (&scan.gdds_ps2, gdd_required) {
        (Some(g), _) => g.values(),
        (None, false) => Vec::new(),
        (None, true) => {
            return Err(Error::Config {
                path: "scan.gdds_ps2".into(),
                reason: "required for this subcommand".into(),
            })
        }
    };
    let spec = ScanSpec {
        pulse: cfg.pulse()?,
        areas_pi: scan.areas_pi.values(),
        gdds_ps2: gdds,
        system: cfg.system()?,
        tolerance: cfg.tolerance()?,
    };
    in_section("scan", spec.validate())?;
    Ok(spec)
}

fn rabi(cfg: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let mut spec = scan_spec(cfg, false)?;
    spec.pulse.gdd_ps2 = 0.0;
    let mut curve = power_scan(&spec)?;
    curve.counts_per_population = cfg.scan.as_ref().and_then(|s| s.counts_per_population);
    out.table("rabi", |w| curve.write_csv(w))?;
    out.json(
        "rabi_summary",
        &json!({
            "first_maximum_area_pi": curve.first_maximum().map(|i| curve.area_pi[i]),
            "max_area_pi": curve.area_pi[curve.argmax()],
            "max_excitation": curve.p_e[curve.argmax()],
        }),
    )
}

fn label(g: f64) -> String {
    format!("{g}").replace('.', "p")
}

fn rap(cfg: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let mut spec = scan_spec(cfg, false)?;
    let mut chirps = spec.gdds_ps2.clone();
    if chirps.is_empty() {
        let mut g = spec.pulse.gdd_ps2;
        if g == 0.0 {
            if let Some(st) = &cfg.stretcher {
                g = in_section("stretcher", treacy_gdd(st))?;
            }
        }
        chirps.push(g);
    }
    if chirps.contains(&0.0) {
        return Err(Error::Config {
            path: "pulse.gdd_ps2".into(),
            reason: "rap needs nonzero chirps (set pulse.gdd_ps2, scan.gdds_ps2 or stretcher)".into(),
        });
    }
    let k = cfg.scan.as_ref().and_then(|s| s.counts_per_population);
    let mut summary = Vec::new();
    for g in chirps {
        spec.pulse.gdd_ps2 = g;
        let mut curve = power_scan(&spec)?;
        curve.counts_per_population = k;
        out.table(&format!("rap_gdd_{}", label(g)), |w| curve.write_csv(w))?;
        summary.push(json!({
            "gdd_ps2": g,
            "max_area_pi": curve.area_pi[curve.argmax()],
            "max_excitation": curve.p_e[curve.argmax()],
        }));
    }
    out.json("rap_summary", &summary)
}

fn map(cfg: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let spec = scan_spec(cfg, true)?;
    let m = in_section("scan", chirp_area_map(&spec))?;
    out.table("map", |w| m.write_csv(w))
}

fn trace(cfg: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let modulation = *RunConfig::require("modulation", &cfg.modulation)?;
    in_section("modulation", modulation.validate())?;
    let mut tr = robustness_trace(&modulation, &cfg.pulse()?, &cfg.system()?, cfg.tolerance()?)?;
    tr.counts_per_population = cfg.scan.as_ref().and_then(|s| s.counts_per_population);
    out.table("trace", |w| tr.write_csv(w))?;
    out.json(
        "trace_summary",
        &json!({
            "fluctuation": tr.fluctuation,
            "min_excitation": tr.p_e.iter().copied().fold(f64::INFINITY, f64::min),
            "max_excitation": tr.p_e.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            "center_area_pi": modulation.center_area_pi,
        }),
    )
}

fn dressed(cfg: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let pulse = cfg.pulse()?;
    let system = cfg.system()?;
    let field = pulse.synthesize()?;
    let detuning = instantaneous_detuning(&field)?;
    let traj = evolve(&field, &system, cfg.tolerance()?)?;
    out.table("field", |w| field.write_csv(&detuning, w))?;
    out.table("trajectory", |w| traj.write_csv(w))?;
    out.table("dressed", |w| {
        use std::io::Write;
        writeln!(w, "t_ps,omega_radps,delta_radps,e_plus,e_minus,mixing_angle")?;
        for (k, (&om, &de)) in traj.omega.iter().zip(&traj.delta).enumerate() {
            let f = dressed_frame(om, de);
            writeln!(w, "{},{om},{de},{},{},{}", field.time(k), f.e_plus, f.e_minus, f.mixing_angle)?;
        }
        Ok(())
    })?;
    out.json(
        "dressed_summary",
        &json!({
            "final_p_e": traj.final_pe(),
            "photon_yield": traj.photon_yield(),
            "adiabaticity_max": adiabaticity_parameter(&field)?,
            "stretched_fwhm_ps": field.intensity_fwhm(),
            "stretched_fwhm_estimate_ps": pulse.stretched_fwhm_estimate(),
            "hygiene": traj.hygiene(),
        }),
    )
}

fn gdd(cfg: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let st = *RunConfig::require("stretcher", &cfg.stretcher)?;
    let g = in_section("stretcher", treacy_gdd(&st))?;
    let mut result = json!({
        "gdd_ps2": g,
        "sin_diffraction": st.sin_diffraction(),
        "stretcher": st,
    });
    if let Some(p) = &cfg.pulse {
        let p = p.with_gdd(g);
        in_section("pulse", p.validate())?;
        result["stretched_fwhm_estimate_ps"] = json!(p.stretched_fwhm_estimate());
        result["stretched_fwhm_ps"] = json!(p.synthesize()?.intensity_fwhm());
        if let Some(target) = cfg.pulse.map(|q| q.gdd_ps2).filter(|t| *t != 0.0) {
            result["separation_for_pulse_gdd_mm"] = json!(in_section("stretcher", separation_for_gdd(&st, target))?);
        }
    }
    out.json("gdd", &result)
}

fn source_model(cfg: &RunConfig) -> Result<crate::photonstats::SourceModel> {
    let src = RunConfig::require("source", &cfg.source)?;
    let counts = match src.jump_trajectories {
        Some(n) => {
            let pulse = cfg.pulse()?;
            let system = cfg.system()?;
            let field = pulse.synthesize()?;
            let opts = JumpOptions {
                n_pulses: n,
                seed: cfg.seed.wrapping_add(2),
                rep_period_ps: 1e6 / src.rep_rate_mhz,
                tol: cfg.tolerance()?,
            };
            Some(photons_per_pulse(&field, &system, &opts)?)
        }
        None => None,
    };
    in_section("source", src.model(cfg.system.as_ref(), counts.as_deref()))
}

fn hbt(cfg: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let model = source_model(cfg)?;
    let h = *RunConfig::require("hbt", &cfg.hbt)?;
    let hist = in_section("hbt", simulate_hbt(&model, h.n_pulses, cfg.seed))?;
    let r = in_section("hbt", estimate_g2(&hist, h.window_ns, h.n_side_peaks))?;
    out.table("hbt_histogram", |w| hist.write_csv(w))?;
    out.json("g2", &json!({ "result": r, "model_g2": model.g2(), "source": model }))
}

fn hom(cfg: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let model = source_model(cfg)?;
    let h = *RunConfig::require("hom", &cfg.hom)?;
    let geometry = h.geometry();
    in_section("hom", geometry.validate(model.rep_period_ns))?;
    let par = in_section("hom", simulate_hom(&model, &geometry, Polarization::Parallel, h.n_periods, cfg.seed))?;
    let cross = in_section(
        "hom",
        simulate_hom(&model, &geometry, Polarization::Cross, h.n_periods, cfg.seed.wrapping_add(1)),
    )?;
    let g2 = h.correction_g2.unwrap_or(Measured::exact(model.g2()));
    let result = in_section(
        "hom",
        HomResult::analyze(
            &par,
            &cross,
            h.window_ns,
            &geometry,
            g2,
            Measured::new(h.mz_visibility, h.mz_visibility_sigma),
        ),
    )?;
    out.table("hom_parallel", |w| par.write_csv(w))?;
    out.table("hom_cross", |w| cross.write_csv(w))?;
    out.json("hom", &json!({ "result": result, "source": model, "geometry": geometry }))
}

fn g2(cfg: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let g = RunConfig::require("g2", &cfg.g2)?;
    let text = read_table(&g.histogram).map_err(|e| Error::Config {
        path: "g2.histogram".into(),
        reason: e.to_string(),
    })?;
    let hist = CoincidenceHistogram::read_csv(text.as_bytes()).map_err(|e| Error::Config {
        path: "g2.histogram".into(),
        reason: e.to_string(),
    })?;
    let r = in_section("g2", estimate_g2(&hist, g.window_ns, g.n_side_peaks))?;
    out.json("g2", &r)
}

fn spectrum(cfg: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let sc = RunConfig::require("spectrum", &cfg.spectrum)?;
    let spec = match (&sc.synth, &sc.input) {
        (Some(s), _) => {
            let sp = in_section(
                "spectrum.synth",
                synth_spectrum(&s.params, s.start_ghz, s.stop_ghz, s.n_points, s.noise, cfg.seed),
            )?;
            out.table("spectrum", |w| sp.write_csv(w))?;
            sp
        }
        (None, Some(path)) => {
            let text = read_table(path).map_err(|e| Error::Config {
                path: "spectrum.input".into(),
                reason: e.to_string(),
            })?;
            Spectrum::read_csv(text.as_bytes()).map_err(|e| Error::Config {
                path: "spectrum.input".into(),
                reason: e.to_string(),
            })?
        }
        (None, None) => {
            return Err(Error::Config {
                path: "spectrum".into(),
                reason: "needs `synth` or `input`".into(),
            })
        }
    };
    if sc.fit {
        let opts = FitOptions {
            fit_baseline: sc.fit_baseline,
            ..FitOptions::default()
        };
        let fit = in_section("spectrum", fit_voigt(&spec, &opts))?;
        out.json("voigt_fit", &fit)?;
    }
    Ok(())
}
