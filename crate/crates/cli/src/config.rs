//! Job descriptions shared by the subcommand flags and the `run` config file.
//!
//! Every field has an explicit default so that the manifest can echo the fully
//! resolved job.

use std::path::PathBuf;

use clap::Args;
use gmatern::{
    CovarianceFamily, CovarianceModel, DistanceKernel, Grid, IntensitySource, LgcpSpec, MarkLaw, Preset, ShapeId,
    StormShape, Window,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Contents of a `run` config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default, skip_serializing)]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing)]
    pub threads: Option<usize>,
    pub job: Job,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Job {
    SimulateLgcp(SimulateLgcpJob),
    Thin(ThinJob),
    Intensity(IntensityJob),
    Extremal(ExtremalJob),
    Estimate(EstimateJob),
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::SimulateLgcp(_) => "simulate-lgcp",
            Job::Thin(_) => "thin",
            Job::Intensity(_) => "intensity",
            Job::Extremal(_) => "extremal",
            Job::Estimate(_) => "estimate",
        }
    }
}

pub fn parse_config(text: &str) -> CliResult<RunConfig> {
    toml::from_str(text).map_err(|e| CliError::config(format!("config: {}", e.message().trim())))
}

fn lower0() -> Vec<f64> {
    vec![0.0, 0.0]
}
fn upper10() -> Vec<f64> {
    vec![10.0, 10.0]
}
fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn gauss() -> String {
    "gauss_density".into()
}

pub fn window(lower: &[f64], upper: &[f64]) -> CliResult<Window> {
    Ok(Window::new(lower.to_vec(), upper.to_vec())?)
}

/// Intensity of the ground process: Poisson when `lambda` is set, otherwise an LGCP.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceArgs {
    /// Constant intensity; overrides the LGCP parameters.
    #[arg(long)]
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Mean of the Gaussian field.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    #[serde(default)]
    pub mu: f64,
    #[arg(long, default_value = "exponential")]
    #[serde(default = "exponential")]
    pub family: String,
    #[arg(long, default_value_t = 1.0)]
    #[serde(default = "one")]
    pub variance: f64,
    #[arg(long, default_value_t = 1.0)]
    #[serde(default = "one")]
    pub range: f64,
    /// Added to the log-intensity.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    #[serde(default)]
    pub offset: f64,
}

fn exponential() -> String {
    "exponential".into()
}

impl Default for SourceArgs {
    fn default() -> Self {
        SourceArgs {
            lambda: None,
            mu: 0.0,
            family: exponential(),
            variance: 1.0,
            range: 1.0,
            offset: 0.0,
        }
    }
}

impl SourceArgs {
    pub fn lgcp(&self) -> CliResult<LgcpSpec> {
        let family: CovarianceFamily = self.family.parse()?;
        let cov = CovarianceModel::new(family, self.variance, self.range)?;
        Ok(LgcpSpec::stationary(self.mu, cov).with_offset(self.offset))
    }

    pub fn resolve(&self) -> CliResult<IntensitySource> {
        let s = match self.lambda {
            Some(lambda) => IntensitySource::Constant { lambda },
            None => IntensitySource::Lgcp { spec: self.lgcp()? },
        };
        s.validate()?;
        Ok(s)
    }
}

/// Thinning rule by name plus the parameters it needs.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetArgs {
    /// matern_i, generalized_matern_i, matern_ii, generalized_matern_ii, teichmann_i,
    /// teichmann_ii, soft_core_kernel, extremal_dominance or visible_centre.
    #[arg(long = "preset")]
    pub name: String,
    #[arg(long)]
    #[serde(default)]
    pub radius: Option<f64>,
    /// Distance kernel of the Teichmann rules: linear, step or gaussian.
    #[arg(long)]
    #[serde(default)]
    pub kernel: Option<String>,
    /// Deletion probability of the step kernel.
    #[arg(long)]
    #[serde(default)]
    pub prob: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    pub scale: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    pub height: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    pub mark_scaled: bool,
    /// Cell side of the dominance grid.
    #[arg(long)]
    #[serde(default)]
    pub grid_spacing: Option<f64>,
}

impl PresetArgs {
    fn need(&self, v: Option<f64>, what: &str) -> CliResult<f64> {
        v.ok_or_else(|| CliError::config(format!("preset `{}` needs `{what}`", self.name)))
    }

    /// `window` is used for the dominance grid only.
    pub fn resolve(&self, window: &Window) -> CliResult<Preset> {
        let name = self.name.replace('-', "_");
        let kernel = || -> CliResult<DistanceKernel> {
            let k = self.kernel.as_deref().unwrap_or("linear");
            Ok(match k {
                "linear" => DistanceKernel::Linear {
                    radius: self.need(self.radius, "radius")?,
                },
                "step" => DistanceKernel::Step {
                    radius: self.need(self.radius, "radius")?,
                    prob: self.need(self.prob, "prob")?,
                },
                "gaussian" => DistanceKernel::Gaussian {
                    scale: self.need(self.scale, "scale")?,
                    height: self.height.unwrap_or(1.0),
                },
                other => return Err(CliError::config(format!("unknown kernel `{other}`"))),
            })
        };
        let p = match name.as_str() {
            "matern_i" => Preset::MaternI { radius: self.need(self.radius, "radius")? },
            "generalized_matern_i" => Preset::GeneralizedMaternI { radius: self.need(self.radius, "radius")? },
            "matern_ii" => Preset::MaternII { radius: self.need(self.radius, "radius")? },
            "generalized_matern_ii" => Preset::GeneralizedMaternII { radius: self.need(self.radius, "radius")? },
            "teichmann_i" => Preset::TeichmannI { kernel: kernel()? },
            "teichmann_ii" => Preset::TeichmannII {
                kernel: kernel()?,
                mark_scaled: self.mark_scaled,
            },
            "soft_core_kernel" => Preset::SoftCoreKernel { radius: self.need(self.radius, "radius")? },
            "extremal_dominance" => Preset::ExtremalDominance {
                grid: Grid::with_spacing(window.clone(), self.grid_spacing.unwrap_or(0.25))?,
            },
            "visible_centre" => Preset::VisibleCentre,
            other => return Err(CliError::config(format!("unknown preset `{other}`"))),
        };
        p.validate()?;
        Ok(p)
    }
}

pub fn shape(name: &str, dim: usize) -> CliResult<StormShape> {
    let id: ShapeId = name.parse()?;
    Ok(StormShape::new(id, dim)?)
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateLgcpJob {
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = lower0())]
    #[serde(default = "lower0")]
    pub lower: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = upper10())]
    #[serde(default = "upper10")]
    pub upper: Vec<f64>,
    /// Field grid cells per axis.
    #[arg(long, default_value_t = 50)]
    #[serde(default = "fifty")]
    pub cells: usize,
    #[arg(long, default_value_t = 1)]
    #[serde(default = "one_usize")]
    pub replicates: usize,
    #[command(flatten)]
    #[serde(default)]
    pub source: SourceArgs,
}

fn fifty() -> usize {
    50
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThinJob {
    /// Pattern CSV; the window is read from the JSON sidecar with the same stem.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub preset: PresetArgs,
    #[arg(long, default_value_t = 1.0)]
    #[serde(default = "one")]
    pub p0: f64,
    /// Truncation level of Pareto kernel marks attached to unmarked input.
    #[arg(long, default_value_t = 0.1)]
    #[serde(default = "tenth")]
    pub tau: f64,
    #[arg(long, default_value = "gauss_density")]
    #[serde(default = "gauss")]
    pub shape: String,
    /// The input window is taken as dilated by this much; output is cropped back.
    #[arg(long, default_value_t = 0.0)]
    #[serde(default)]
    pub dilation: f64,
}

fn tenth() -> f64 {
    0.1
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntensityJob {
    /// closed-form, mc-first-order or mc-second-order.
    #[arg(long)]
    pub mode: String,
    #[command(flatten)]
    pub preset: PresetArgs,
    #[arg(long, default_value_t = 1.0)]
    #[serde(default = "one")]
    pub p0: f64,
    #[command(flatten)]
    #[serde(default)]
    pub source: SourceArgs,
    /// Mark law: uniform, uniform_kernel, pareto_kernel or pair. Defaults to the preset's own.
    #[arg(long)]
    #[serde(default)]
    pub marks: Option<String>,
    #[arg(long, default_value_t = 0.1)]
    #[serde(default = "tenth")]
    pub tau: f64,
    #[arg(long, default_value = "gauss_density")]
    #[serde(default = "gauss")]
    pub shape: String,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = vec![0.0, 0.0])]
    #[serde(default = "origin")]
    pub xi: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default)]
    pub eta: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    #[serde(default = "two_hundred")]
    pub n_psi: usize,
    #[arg(long, default_value_t = 8)]
    #[serde(default = "eight")]
    pub n_mark: usize,
    #[arg(long, default_value_t = 32)]
    #[serde(default = "thirty_two")]
    pub n_mark_inner: usize,
    /// Quadrature cell side.
    #[arg(long, default_value_t = 0.05)]
    #[serde(default = "twentieth")]
    pub spacing: f64,
    /// Cell side of the grid the Gaussian field is simulated on.
    #[arg(long, default_value_t = 0.25)]
    #[serde(default = "quarter")]
    pub field_spacing: f64,
}

fn origin() -> Vec<f64> {
    vec![0.0, 0.0]
}
fn two_hundred() -> usize {
    200
}
fn eight() -> usize {
    8
}
fn thirty_two() -> usize {
    32
}
fn twentieth() -> f64 {
    0.05
}
fn quarter() -> f64 {
    0.25
}

impl IntensityJob {
    pub fn mark_law(&self, preset: &Preset) -> CliResult<MarkLaw> {
        let id: ShapeId = self.shape.parse()?;
        let law = match self.marks.as_deref() {
            None => preset.natural_mark_law(self.tau, id),
            Some("uniform") => MarkLaw::uniform_scalar(0.0, 1.0),
            Some("uniform_kernel") => MarkLaw::uniform_kernel(id),
            Some("pareto_kernel") => MarkLaw::pareto_kernel(self.tau, id),
            Some("pair") => MarkLaw::Pair {
                a: gmatern::ScalarLaw::uniform01(),
                b: gmatern::ScalarLaw::uniform01(),
            },
            Some(other) => return Err(CliError::config(format!("unknown mark law `{other}`"))),
        };
        law.validate()?;
        Ok(law)
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtremalJob {
    /// m3, cox, matern-extremal, visible-centres, mda or fidi.
    #[arg(long)]
    pub mode: String,
    #[arg(long, default_value = "gauss_density")]
    #[serde(default = "gauss")]
    pub shape: String,
    #[arg(long, default_value_t = 0.1)]
    #[serde(default = "tenth")]
    pub tau: f64,
    /// Storm buffer; defaults to the radius where the shape drops below 1e-6 of its peak.
    #[arg(long)]
    #[serde(default)]
    pub buffer: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = lower0())]
    #[serde(default = "lower0")]
    pub lower: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = upper10())]
    #[serde(default = "upper10")]
    pub upper: Vec<f64>,
    /// Surface grid cell side.
    #[arg(long, default_value_t = 0.1)]
    #[serde(default = "tenth")]
    pub spacing: f64,
    #[arg(long, default_value_t = 1)]
    #[serde(default = "one_usize")]
    pub replicates: usize,
    /// Ψ for the Cox-driven modes; Ψ ≡ 1 when `lambda = 1`.
    #[command(flatten)]
    #[serde(default)]
    pub source: SourceArgs,
    /// Cell side of the grid Ψ is simulated on.
    #[arg(long, default_value_t = 0.5)]
    #[serde(default = "half")]
    pub field_spacing: f64,
    /// Dominance grid cell side for matern-extremal.
    #[arg(long, default_value_t = 0.25)]
    #[serde(default = "quarter")]
    pub dominance_spacing: f64,
    /// Evaluation points (flattened) for fidi and mda; defaults to the window centre.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default)]
    pub points: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub thresholds: Vec<f64>,
    /// Block sizes for mda.
    #[arg(long, value_delimiter = ',', default_values_t = vec![10, 50, 200])]
    #[serde(default = "mda_sizes")]
    pub mda_n: Vec<usize>,
}

fn half() -> f64 {
    0.5
}
fn mda_sizes() -> Vec<usize> {
    vec![10, 50, 200]
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateJob {
    /// Glob of input CSV files, processed in sorted order.
    #[arg(long)]
    pub input: String,
    /// intensity, pcf or cdf.
    #[arg(long)]
    pub statistic: String,
    /// Counting region for intensity; defaults to the pattern window.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default)]
    pub region_lower: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default)]
    pub region_upper: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    #[serde(default = "one")]
    pub r_max: f64,
    #[arg(long, default_value_t = 20)]
    #[serde(default = "twenty")]
    pub n_bins: usize,
    /// Minus-sampling depth; defaults to `r_max`.
    #[arg(long)]
    #[serde(default)]
    pub border: Option<f64>,
    /// Column read by the cdf statistic.
    #[arg(long, default_value = "value")]
    #[serde(default = "value_col")]
    pub column: String,
    /// Values are multiplied by this before comparison with exp(−1/z).
    #[arg(long, default_value_t = 1.0)]
    #[serde(default = "one")]
    pub scale: f64,
    #[arg(long, default_value_t = 0.0)]
    #[serde(default)]
    pub z_min: f64,
}

fn twenty() -> usize {
    20
}
fn value_col() -> String {
    "value".into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip_and_unknown_keys() {
        let text = "seed = 3\n[job]\ncommand = \"simulate-lgcp\"\ncells = 10\n[job.source]\nlambda = 2.0\n";
        let c = parse_config(text).unwrap();
        match &c.job {
            Job::SimulateLgcp(s) => {
                assert_eq!(s.cells, 10);
                assert_eq!(s.upper, vec![10.0, 10.0]);
                assert_eq!(s.source.lambda, Some(2.0));
            }
            other => panic!("{other:?}"),
        }
        let back = parse_config(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(serde_json::to_value(&back).unwrap(), serde_json::to_value(&c).unwrap());
        assert!(parse_config("seed = 3\n[job]\ncommand = \"simulate-lgcp\"\ncels = 10\n").is_err());
        assert!(parse_config("seed = 3\nextra = 1\n[job]\ncommand = \"thin\"\n").is_err());
    }

    #[test]
    fn presets_resolve() {
        let w = Window::cube(2, 2.0).unwrap();
        let mut p = PresetArgs {
            name: "matern-ii".into(),
            radius: Some(0.3),
            kernel: None,
            prob: None,
            scale: None,
            height: None,
            mark_scaled: false,
            grid_spacing: None,
        };
        assert_eq!(p.resolve(&w).unwrap(), Preset::MaternII { radius: 0.3 });
        p.name = "teichmann_i".into();
        p.kernel = Some("step".into());
        assert!(p.resolve(&w).is_err());
        p.prob = Some(0.5);
        assert!(p.resolve(&w).is_ok());
        p.name = "strauss".into();
        assert_eq!(p.resolve(&w).unwrap_err().kind, crate::error::Kind::Config);
    }
}
