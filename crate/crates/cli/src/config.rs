//! Run configuration: flags override config-file keys override defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use pnqkd::classical::ClassicalClamp;
use pnqkd::fixtures::{DistanceTable, Fixture};
use pnqkd::optics::DEFAULT_LOSS_DB_PER_KM;
use pnqkd::sweep::distance_grid;
use pnqkd::{CoefficientVector, DetectorParams, EveAttribution, ObjectiveKind};

/// Flags shared by every subcommand. All are optional so that unset flags
/// fall through to the config file.
#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// Line-oriented `key = value` file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Photon-number cutoff of the key states.
    #[arg(long, global = true)]
    pub n_max: Option<usize>,
    /// Distance grid in km as `start:stop:step`.
    #[arg(long, global = true)]
    pub grid: Option<String>,
    /// Fibre attenuation in dB/km.
    #[arg(long = "loss-db-km", global = true)]
    pub loss_db_km: Option<f64>,
    /// Realistic relay detectors as `eta=<f>,dark=<f>[,cutoff=<n>]`.
    #[arg(long, global = true)]
    pub detector: Option<String>,
    /// `table2`, `table3`, `table5`, `optimize`, a CSV table file, or a
    /// comma-separated coefficient list.
    #[arg(long, global = true)]
    pub coeffs: Option<String>,
    /// Squeezing parameter `γ`, or `optimize`.
    #[arg(long, global = true)]
    pub gamma: Option<String>,
    /// Optimizer objective: `quantum`, `classical`, `classical-unclamped`.
    #[arg(long, global = true)]
    pub objective: Option<String>,
    /// Eve's share of the relay: `full` (purification) or `fibre`.
    #[arg(long, global = true)]
    pub attribution: Option<String>,
    /// Seed for optimizer restarts and sampled tomography.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; output does not depend on this.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// SVG plot of the curves.
    #[arg(long, global = true)]
    pub plot: Option<PathBuf>,
    /// Reference curve CSV (`distance_km,<value>`) drawn on the plot.
    #[arg(long, global = true)]
    pub overlay: Vec<PathBuf>,
    /// Machine-readable JSON instead of CSV or text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Distance for single-point commands.
    #[arg(long, global = true)]
    pub distance: Option<f64>,
    /// Shots per basis pair for sampled tomography.
    #[arg(long, global = true)]
    pub shots: Option<u64>,
}

const KEYS: &[&str] = &[
    "n_max", "grid", "loss_db_km", "detector", "coeffs", "gamma", "objective", "attribution", "seed", "workers", "out",
    "plot", "overlay", "json", "distance", "shots",
];

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("config line {}: expected `key = value`", no + 1))?;
        let key = key.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            bail!("config line {}: unknown key `{key}`", no + 1);
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

impl CommonArgs {
    /// Fills unset flags from the config file named by `--config`.
    pub fn merged(mut self) -> Result<Self> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
        let map = parse_config_file(&text)?;
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            v.parse().map_err(|e| anyhow!("config key {key}: {e}"))
        }
        for (key, v) in &map {
            match key.as_str() {
                "n_max" => set(&mut self.n_max, num(key, v)?),
                "grid" => set(&mut self.grid, v.clone()),
                "loss_db_km" => set(&mut self.loss_db_km, num(key, v)?),
                "detector" => set(&mut self.detector, v.clone()),
                "coeffs" => set(&mut self.coeffs, v.clone()),
                "gamma" => set(&mut self.gamma, v.clone()),
                "objective" => set(&mut self.objective, v.clone()),
                "attribution" => set(&mut self.attribution, v.clone()),
                "seed" => set(&mut self.seed, num(key, v)?),
                "workers" => set(&mut self.workers, num(key, v)?),
                "out" => set(&mut self.out, PathBuf::from(v)),
                "plot" => set(&mut self.plot, PathBuf::from(v)),
                "overlay" if self.overlay.is_empty() => {
                    self.overlay = v.split(',').map(|s| PathBuf::from(s.trim())).collect();
                }
                "json" => self.json |= num::<bool>(key, v)?,
                "distance" => set(&mut self.distance, num(key, v)?),
                "shots" => set(&mut self.shots, num(key, v)?),
                _ => {}
            }
        }
        Ok(self)
    }
}

fn set<T>(slot: &mut Option<T>, value: T) {
    if slot.is_none() {
        *slot = Some(value);
    }
}

/// Parsed `start:stop:step`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            bail!("grid must be start:stop:step, got {s:?}");
        }
        let v = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|e| anyhow!("grid {s:?}: {e}")))
            .collect::<Result<Vec<_>>>()?;
        let spec = Self {
            start: v[0],
            stop: v[1],
            step: v[2],
        };
        if spec.start < 0.0 {
            bail!("grid start must be nonnegative");
        }
        spec.points()?;
        Ok(spec)
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        Ok(distance_grid(self.start, self.stop, self.step)?)
    }
}

impl std::fmt::Display for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.step)
    }
}

/// Parses `eta=<f>,dark=<f>[,cutoff=<n>]`.
pub fn parse_detector(s: &str) -> Result<DetectorParams> {
    let (mut eta, mut dark, mut cutoff) = (None, None, None);
    for part in s.split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| anyhow!("detector field {part:?} must be key=value"))?;
        let v = v.trim();
        match k.trim() {
            "eta" => eta = Some(v.parse::<f64>()?),
            "dark" => dark = Some(v.parse::<f64>()?),
            "cutoff" => cutoff = Some(v.parse::<usize>()?),
            other => bail!("unknown detector field {other:?}"),
        }
    }
    let det = DetectorParams::new(
        eta.ok_or_else(|| anyhow!("detector needs eta="))?,
        dark.ok_or_else(|| anyhow!("detector needs dark="))?,
    )?;
    Ok(match cutoff {
        Some(c) => det.with_thermal_cutoff(c)?,
        None => det,
    })
}

pub fn parse_objective(s: &str) -> Result<ObjectiveKind> {
    Ok(match s {
        "quantum" => ObjectiveKind::Quantum,
        "classical" => ObjectiveKind::Classical(ClassicalClamp::PerOutcome),
        "classical-unclamped" => ObjectiveKind::Classical(ClassicalClamp::None),
        other => bail!("unknown objective {other:?}"),
    })
}

pub fn parse_attribution(s: &str) -> Result<EveAttribution> {
    Ok(match s {
        "full" => EveAttribution::FullPurification,
        "fibre" | "fiber" => EveAttribution::FibreOnly,
        other => bail!("unknown attribution {other:?}"),
    })
}

/// Resolved coefficient choice.
#[derive(Clone, Debug)]
pub enum Coeffs {
    Table { name: String, table: DistanceTable },
    Fixed(CoefficientVector),
    Optimize,
}

impl Coeffs {
    pub fn label(&self) -> String {
        match self {
            Coeffs::Table { name, .. } => name.clone(),
            Coeffs::Fixed(c) => c.as_slice().iter().map(|x| x.to_string()).collect::<Vec<_>>().join("/"),
            Coeffs::Optimize => "optimize".into(),
        }
    }

    /// Cutoff implied by the choice, if any.
    pub fn n_max(&self) -> Option<usize> {
        match self {
            Coeffs::Table { table, .. } => Some(table.columns().len() - 1),
            Coeffs::Fixed(c) => Some(c.n_max()),
            Coeffs::Optimize => None,
        }
    }
}

pub fn parse_coeffs(s: &str) -> Result<Coeffs> {
    let fixture = match s {
        "table2" => Some(Fixture::Table2),
        "table3" => Some(Fixture::Table3),
        "table5" => Some(Fixture::Table5),
        "optimize" => return Ok(Coeffs::Optimize),
        _ => None,
    };
    if let Some(f) = fixture {
        return Ok(Coeffs::Table {
            name: s.into(),
            table: DistanceTable::load(f),
        });
    }
    if let Ok(values) = s.split(',').map(|p| p.trim().parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>() {
        return Ok(Coeffs::Fixed(CoefficientVector::new(values)?));
    }
    let path = Path::new(s);
    let text = std::fs::read_to_string(path).with_context(|| format!("reading coefficient table {s}"))?;
    Ok(Coeffs::Table {
        name: s.into(),
        table: DistanceTable::parse(&text)?,
    })
}

/// Squeezing choice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gamma {
    Fixed(f64),
    Optimize,
}

pub fn parse_gamma(s: &str) -> Result<Gamma> {
    if s == "optimize" {
        return Ok(Gamma::Optimize);
    }
    let g: f64 = s.parse().map_err(|e| anyhow!("gamma {s:?}: {e}"))?;
    if !(0.0..1.0).contains(&g) {
        bail!("gamma must lie in [0, 1)");
    }
    Ok(Gamma::Fixed(g))
}

/// Fully resolved configuration of one run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub n_max: usize,
    pub grid: GridSpec,
    pub loss_db_km: f64,
    pub detector: Option<DetectorParams>,
    pub coeffs: Coeffs,
    pub gamma: Option<Gamma>,
    pub objective: Option<ObjectiveKind>,
    pub attribution: EveAttribution,
    pub seed: u64,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub plot: Option<PathBuf>,
    pub overlay: Vec<PathBuf>,
    pub json: bool,
    pub distance: f64,
    pub shots: Option<u64>,
}

/// Command-dependent defaults.
pub struct Defaults {
    pub n_max: usize,
    pub grid: &'static str,
}

impl RunConfig {
    pub fn resolve(args: CommonArgs, defaults: Defaults) -> Result<Self> {
        let args = args.merged()?;
        let detector = args.detector.as_deref().map(parse_detector).transpose()?;
        let gamma = args.gamma.as_deref().map(parse_gamma).transpose()?;
        let explicit = args.coeffs.as_deref().map(parse_coeffs).transpose()?;
        let n_max = match (args.n_max, explicit.as_ref().and_then(Coeffs::n_max)) {
            (Some(n), Some(m)) if n != m => bail!("--n-max {n} conflicts with {m} implied by the coefficients"),
            (Some(n), _) | (None, Some(n)) => n,
            (None, None) => defaults.n_max,
        };
        if n_max == 0 {
            bail!("n_max must be at least 1");
        }
        let coeffs = match explicit {
            Some(c) => c,
            None => match (n_max, detector.is_some()) {
                (1, false) => parse_coeffs("table3")?,
                (1, true) => parse_coeffs("table5")?,
                (7, false) => parse_coeffs("table2")?,
                _ => Coeffs::Optimize,
            },
        };
        if gamma.is_some() && args.coeffs.is_some() {
            bail!("--gamma and --coeffs are mutually exclusive");
        }
        if args.shots == Some(0) {
            bail!("shots must be at least 1");
        }
        if args.workers == Some(0) {
            bail!("workers must be at least 1");
        }
        let cfg = Self {
            n_max,
            grid: GridSpec::parse(args.grid.as_deref().unwrap_or(defaults.grid))?,
            loss_db_km: args.loss_db_km.unwrap_or(DEFAULT_LOSS_DB_PER_KM),
            detector,
            coeffs,
            gamma,
            objective: args.objective.as_deref().map(parse_objective).transpose()?,
            attribution: args.attribution.as_deref().map(parse_attribution).transpose()?.unwrap_or_default(),
            seed: args.seed.unwrap_or(0),
            workers: args.workers,
            out: args.out,
            plot: args.plot,
            overlay: args.overlay,
            json: args.json,
            distance: args.distance.unwrap_or(100.0),
            shots: args.shots,
        };
        if cfg.loss_db_km < 0.0 || !cfg.loss_db_km.is_finite() {
            bail!("loss must be nonnegative");
        }
        for path in cfg.out.iter().chain(cfg.plot.iter()) {
            check_writable(path)?;
        }
        for path in &cfg.overlay {
            if !path.is_file() {
                bail!("overlay {} not found", path.display());
            }
        }
        Ok(cfg)
    }

    /// `key=value` pairs echoed into output metadata.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut v = vec![
            ("n_max".to_string(), self.n_max.to_string()),
            ("grid".into(), self.grid.to_string()),
            ("loss_db_km".into(), self.loss_db_km.to_string()),
        ];
        if let Some(d) = &self.detector {
            v.push((
                "detector".into(),
                format!("eta={},dark={},cutoff={}", d.efficiency, d.dark_count, d.thermal_cutoff),
            ));
            v.push(("attribution".into(), format!("{:?}", self.attribution)));
        }
        match self.gamma {
            Some(Gamma::Fixed(g)) => v.push(("gamma".into(), g.to_string())),
            Some(Gamma::Optimize) => v.push(("gamma".into(), "optimize".into())),
            None => v.push(("coeffs".into(), self.coeffs.label())),
        }
        if let Some(k) = self.objective {
            v.push(("objective".into(), format!("{k:?}")));
        }
        v
    }
}

/// Fails early when the parent directory of an output path is missing.
fn check_writable(path: &Path) -> Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    if !parent.is_dir() {
        bail!("output directory {} does not exist", parent.display());
    }
    if path.is_dir() {
        bail!("output path {} is a directory", path.display());
    }
    Ok(())
}
