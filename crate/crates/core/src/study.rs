//! Monte Carlo studies: flat `key = value` configs, seeded parallel
//! replicates, and median-ratio aggregation.

use std::collections::BTreeSet;
use std::str::FromStr;

use rayon::prelude::*;

use crate::data::{DesignKind, Loss};
use crate::design::{DesignDensity, DesignSpec};
use crate::error::{Error, Result};
use crate::estimator::{fit, BlockFunctionals};
use crate::model::TrueModel;
use crate::oracle::{kernel_sub_oracle, kernel_super_oracle, oracle_fit_with, true_functionals, univariate_ep_density};
use crate::schedule::{build_schedule, BlockSchedule};
use crate::sim::{
    fit_ise, generate_dataset, response_ise, ErrorLaw, IseGrid, ModelKind, ModelSpec, ResponseDomainKind, TrigPoly,
    DEFAULT_Y_WINDOW,
};

/// Environment variable capping the worker threads of a study.
pub const THREADS_ENV: &str = "EP_CDE_THREADS";

/// Benchmarks fitted next to the EP estimator in every replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Comparator {
    /// Gaussian kernel on `Y` alone with the N(0,1)-optimal and Silverman bandwidths.
    Kernel,
    /// The EP pipeline with Wiener weights from the truth.
    Oracle,
    /// The univariate EP density of `Y` alone.
    Univariate,
}

impl FromStr for Comparator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "kernel" => Ok(Comparator::Kernel),
            "oracle" => Ok(Comparator::Oracle),
            "univariate" => Ok(Comparator::Univariate),
            other => Err(Error::InvalidArgument(format!("unknown comparator `{other}`"))),
        }
    }
}

/// A fully specified study.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub model: ModelSpec,
    pub n_values: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub loss: Loss,
    pub y_window: f64,
    /// `(ny, nx)`; sized from the schedule when absent.
    pub grid: Option<(usize, usize)>,
    pub compare: BTreeSet<Comparator>,
}

impl StudyConfig {
    /// Standard normal response independent of a uniform predictor, line
    /// loss, kernel benchmarks.
    pub fn null_normal(n_values: Vec<usize>, replicates: usize, seed: u64) -> Self {
        StudyConfig {
            model: ModelSpec::standard_normal_null(),
            n_values,
            replicates,
            seed,
            loss: Loss::Line,
            y_window: DEFAULT_Y_WINDOW,
            grid: None,
            compare: [Comparator::Kernel].into_iter().collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("replicates must be at least 1".into()));
        }
        if self.n_values.is_empty() {
            return Err(Error::InvalidArgument("at least one sample size is required".into()));
        }
        if let Some(&n) = self.n_values.iter().find(|&&n| n < crate::design::MIN_SAMPLE_SIZE) {
            return Err(Error::SampleTooSmall {
                n,
                min: crate::design::MIN_SAMPLE_SIZE,
            });
        }
        if !(self.y_window > 0.0) {
            return Err(Error::InvalidArgument("y_window must be positive".into()));
        }
        if let Some((ny, nx)) = self.grid {
            if ny < 3 || nx < 3 {
                return Err(Error::InvalidArgument("grid needs at least 3 nodes per axis".into()));
            }
        }
        let unit = self.model.domain() == ResponseDomainKind::UnitInterval;
        if (self.loss == Loss::Square) != unit {
            return Err(Error::InvalidArgument(format!(
                "{} loss does not match the declared response domain",
                self.loss
            )));
        }
        Ok(())
    }
}

enum DomainChoice {
    Unit,
    Real,
    Conditioned,
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("`{key}`: cannot parse `{}`", v.trim())))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

impl FromStr for StudyConfig {
    type Err = Error;

    /// Lines of `key = value`; `#` starts a comment. Unknown keys are errors.
    fn from_str(text: &str) -> Result<Self> {
        let mut model = "independent".to_string();
        let mut law = "normal".to_string();
        let (mut trunc_lo, mut trunc_hi) = (-2.0, 2.0);
        let (mut location, mut scale) = (0.0, 1.0);
        let mut mean = TrigPoly::constant(0.0);
        let mut sigma = TrigPoly::constant(1.0);
        let mut design = DesignKind::Random;
        let mut design_density = "uniform".to_string();
        let mut slope = 0.0;
        let mut domain: Option<DomainChoice> = None;
        let mut n_values = None;
        let mut replicates = None;
        let mut seed = 0u64;
        let mut loss = Loss::Line;
        let mut y_window = DEFAULT_Y_WINDOW;
        let (mut ny, mut nx) = (None, None);
        let mut compare: BTreeSet<Comparator> = [Comparator::Kernel].into_iter().collect();

        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("line {}: expected `key = value`", no + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "model" => model = value.to_string(),
                "law" => law = value.to_string(),
                "trunc_lo" => trunc_lo = parse_num(key, value)?,
                "trunc_hi" => trunc_hi = parse_num(key, value)?,
                "location" => location = parse_num(key, value)?,
                "scale" => scale = parse_num(key, value)?,
                "mean_constant" => mean.constant = parse_num(key, value)?,
                "mean_cos" => mean.cos = parse_list(key, value)?,
                "mean_sin" => mean.sin = parse_list(key, value)?,
                "sigma_constant" => sigma.constant = parse_num(key, value)?,
                "sigma_cos" => sigma.cos = parse_list(key, value)?,
                "sigma_sin" => sigma.sin = parse_list(key, value)?,
                "design" => design = value.parse()?,
                "design_density" => design_density = value.to_string(),
                "design_slope" => slope = parse_num(key, value)?,
                "response_domain" => {
                    domain = Some(match value {
                        "unit" | "unit_interval" => DomainChoice::Unit,
                        "unit_conditioned" => DomainChoice::Conditioned,
                        "real" | "real_line" => DomainChoice::Real,
                        other => {
                            return Err(Error::InvalidArgument(format!("unknown response domain `{other}`")));
                        }
                    })
                }
                "n" => n_values = Some(parse_list(key, value)?),
                "replicates" => replicates = Some(parse_num(key, value)?),
                "seed" => seed = parse_num(key, value)?,
                "loss" => loss = value.parse()?,
                "y_window" => y_window = parse_num(key, value)?,
                "grid_ny" => ny = Some(parse_num(key, value)?),
                "grid_nx" => nx = Some(parse_num(key, value)?),
                "compare" => {
                    compare = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty() && *s != "none")
                        .map(str::parse)
                        .collect::<Result<_>>()?
                }
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "line {}: unknown key `{other}`",
                        no + 1
                    )));
                }
            }
        }

        let law = match law.as_str() {
            "normal" => ErrorLaw::Normal,
            "laplace" => ErrorLaw::Laplace,
            "uniform" => ErrorLaw::Uniform,
            "truncnormal" => ErrorLaw::TruncatedNormal {
                lo: trunc_lo,
                hi: trunc_hi,
            },
            other => return Err(Error::InvalidArgument(format!("unknown error law `{other}`"))),
        };
        let kind = match model.as_str() {
            "independent" => ModelKind::Independent { law, location, scale },
            "additive" => ModelKind::Additive {
                mean,
                scale: sigma,
                law,
            },
            other => return Err(Error::InvalidArgument(format!("unknown model kind `{other}`"))),
        };
        let density = match design_density.as_str() {
            "uniform" => DesignDensity::Uniform,
            "linear" => DesignDensity::Linear { slope },
            other => return Err(Error::InvalidArgument(format!("unknown design density `{other}`"))),
        };
        let domain = domain.unwrap_or(match loss {
            Loss::Square => DomainChoice::Unit,
            Loss::Line => DomainChoice::Real,
        });
        let design = DesignSpec::new(design, density)?;
        let model = match domain {
            DomainChoice::Unit => ModelSpec::new(kind, design, ResponseDomainKind::UnitInterval)?,
            DomainChoice::Real => ModelSpec::new(kind, design, ResponseDomainKind::RealLine)?,
            DomainChoice::Conditioned => ModelSpec::conditioned_on_unit(kind, design)?,
        };
        let grid = match (ny, nx) {
            (Some(a), Some(b)) => Some((a, b)),
            (None, None) => None,
            _ => return Err(Error::InvalidArgument("grid_ny and grid_nx must be given together".into())),
        };
        let config = StudyConfig {
            model,
            n_values: n_values.ok_or_else(|| Error::InvalidArgument("missing key `n`".into()))?,
            replicates: replicates.ok_or_else(|| Error::InvalidArgument("missing key `replicates`".into()))?,
            seed,
            loss,
            y_window,
            grid,
            compare,
        };
        config.validate()?;
        Ok(config)
    }
}

/// SplitMix64 finaliser.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one replicate, independent of execution order.
pub fn replicate_seed(master: u64, n: usize, replicate: usize) -> u64 {
    mix64(mix64(mix64(master) ^ n as u64) ^ replicate as u64)
}

/// Outcome of one replicate. Benchmarks not requested are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    pub ise_ep: f64,
    pub ise_super: Option<f64>,
    pub ise_sub: Option<f64>,
    pub ise_oracle: Option<f64>,
    pub ise_univariate: Option<f64>,
    /// Shrunken interaction energy of the EP fit.
    pub bivariate_energy: f64,
    pub difficulty: f64,
}

/// Aggregates for one sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct CellReport {
    pub n: usize,
    pub records: Vec<ReplicateRecord>,
    pub failures: Vec<(usize, String)>,
}

/// Midpoint-of-two median; `None` on empty input.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

impl CellReport {
    fn ratios(&self, pick: impl Fn(&ReplicateRecord) -> Option<f64>) -> Vec<f64> {
        self.records
            .iter()
            .filter_map(|r| pick(r).map(|b| r.ise_ep / b))
            .collect()
    }

    pub fn median_ratio_super(&self) -> Option<f64> {
        median(&self.ratios(|r| r.ise_super))
    }

    pub fn median_ratio_sub(&self) -> Option<f64> {
        median(&self.ratios(|r| r.ise_sub))
    }

    pub fn median_ratio_oracle(&self) -> Option<f64> {
        median(&self.ratios(|r| r.ise_oracle))
    }

    pub fn median_ratio_univariate(&self) -> Option<f64> {
        median(&self.ratios(|r| r.ise_univariate))
    }

    pub fn mean_ise_ep(&self) -> Option<f64> {
        mean(&self.records.iter().map(|r| r.ise_ep).collect::<Vec<_>>())
    }

    pub fn mean_ise_oracle(&self) -> Option<f64> {
        mean(&self.records.iter().filter_map(|r| r.ise_oracle).collect::<Vec<_>>())
    }

    pub fn median_bivariate_energy(&self) -> Option<f64> {
        median(&self.records.iter().map(|r| r.bivariate_energy).collect::<Vec<_>>())
    }
}

/// Result of [`run_study`]; cells follow the configured `n` order and records
/// within a cell are sorted by replicate index.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub n_values: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub cells: Vec<CellReport>,
}

impl MonteCarloReport {
    pub fn median_ratio_super(&self) -> Vec<Option<f64>> {
        self.cells.iter().map(CellReport::median_ratio_super).collect()
    }

    pub fn median_ratio_sub(&self) -> Vec<Option<f64>> {
        self.cells.iter().map(CellReport::median_ratio_sub).collect()
    }

    pub fn mean_ise_ep(&self) -> Vec<Option<f64>> {
        self.cells.iter().map(CellReport::mean_ise_ep).collect()
    }

    pub fn mean_ise_oracle(&self) -> Vec<Option<f64>> {
        self.cells.iter().map(CellReport::mean_ise_oracle).collect()
    }

    pub fn failure_count(&self) -> usize {
        self.cells.iter().map(|c| c.failures.len()).sum()
    }
}

/// Truth-side quantities shared by every replicate of one sample size.
struct CellContext<'a> {
    config: &'a StudyConfig,
    truth: &'a TrueModel,
    n: usize,
    schedule: BlockSchedule,
    functionals: Option<BlockFunctionals>,
    grid: IseGrid,
}

fn run_replicate(ctx: &CellContext<'_>, replicate: usize) -> Result<ReplicateRecord> {
    let cfg = ctx.config;
    let seed = replicate_seed(cfg.seed, ctx.n, replicate);
    let data = generate_dataset(&cfg.model, ctx.n, seed)?;
    let ep = fit(&data, cfg.loss, Some(ctx.schedule.clone()), None)?;
    let ise_ep = fit_ise(&ep, ctx.truth, &ctx.grid)?;
    let mut record = ReplicateRecord {
        n: ctx.n,
        replicate,
        seed,
        ise_ep,
        ise_super: None,
        ise_sub: None,
        ise_oracle: None,
        ise_univariate: None,
        bivariate_energy: ep.bivariate_energy(),
        difficulty: ep.difficulty(),
    };
    if cfg.compare.contains(&Comparator::Kernel) {
        let ys = ctx.grid.ys();
        let sup = kernel_super_oracle(data.y(), &ys)?;
        let sub = kernel_sub_oracle(data.y(), &ys)?;
        record.ise_super = Some(response_ise(&sup, ctx.truth, &ctx.grid)?);
        record.ise_sub = Some(response_ise(&sub, ctx.truth, &ctx.grid)?);
    }
    if let Some(functionals) = &ctx.functionals {
        let oracle = oracle_fit_with(&data, functionals, &ctx.schedule, None)?;
        record.ise_oracle = Some(fit_ise(&oracle, ctx.truth, &ctx.grid)?);
    }
    if cfg.compare.contains(&Comparator::Univariate) {
        let uni = univariate_ep_density(data.y(), &ctx.schedule)?;
        record.ise_univariate = Some(fit_ise(&uni, ctx.truth, &ctx.grid)?);
    }
    Ok(record)
}

/// Worker count from [`THREADS_ENV`], if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
}

/// Runs every (n, replicate) cell. Replicate failures are recorded in the
/// report; truth-side failures abort the study.
pub fn run_study(config: &StudyConfig) -> Result<MonteCarloReport> {
    config.validate()?;
    let truth = config.model.true_model()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = thread_cap() {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;

    let mut cells = Vec::with_capacity(config.n_values.len());
    for &n in &config.n_values {
        let schedule = build_schedule(n, config.loss, None)?;
        let functionals = if config.compare.contains(&Comparator::Oracle) {
            Some(true_functionals(&truth, &schedule)?)
        } else {
            None
        };
        let grid = match config.grid {
            Some((ny, nx)) => {
                let auto = IseGrid::for_schedule(&schedule, config.y_window);
                IseGrid { ny, nx, ..auto }
            }
            None => IseGrid::for_schedule(&schedule, config.y_window),
        };
        let ctx = CellContext {
            config,
            truth: &truth,
            n,
            schedule,
            functionals,
            grid,
        };
        let outcomes: Vec<(usize, Result<ReplicateRecord>)> = pool.install(|| {
            (0..config.replicates)
                .into_par_iter()
                .map(|r| (r, run_replicate(&ctx, r)))
                .collect()
        });
        let mut records = Vec::new();
        let mut failures = Vec::new();
        for (r, outcome) in outcomes {
            match outcome {
                Ok(rec) => records.push(rec),
                Err(e) => {
                    log::warn!("n = {n}, replicate {r}: {e}");
                    failures.push((r, e.to_string()));
                }
            }
        }
        cells.push(CellReport { n, records, failures });
    }
    Ok(MonteCarloReport {
        n_values: config.n_values.clone(),
        replicates: config.replicates,
        seed: config.seed,
        cells,
    })
}
