//! Run configuration: a command, its parameter table, a seed, an output
//! directory and the requested formats. Parameters come either from a JSON
//! file or from per-command flags; both paths end in the same typed structs.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use shrinkerlab::soliton::{build_cylinder, build_sphere, find_torus, SymmetricSoliton, TorusConfig};
use shrinkerlab::{Error, Result};

pub const OUTPUT_ENV: &str = "SHRINKERLAB_OUTPUT";
pub const DEFAULT_OUTPUT: &str = "shrinkerlab-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum CommandKind {
    Soliton,
    Spectrum,
    Flow,
    Modes,
    Ancient,
    Density,
    Avoid,
    Report,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Soliton => "soliton",
            CommandKind::Spectrum => "spectrum",
            CommandKind::Flow => "flow",
            CommandKind::Modes => "modes",
            CommandKind::Ancient => "ancient",
            CommandKind::Density => "density",
            CommandKind::Avoid => "avoid",
            CommandKind::Report => "report",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

pub fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

/// The file form of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: CommandKind,
    #[serde(default = "empty_table")]
    pub params: serde_json::Value,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn empty_table() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

/// Typed parameters of one command.
#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    Soliton(SolitonParams),
    Spectrum(SpectrumParams),
    Flow(FlowParams),
    Modes(ModesParams),
    Ancient(AncientParams),
    Density(DensityParams),
    Avoid(AvoidParams),
    Report(ReportParams),
}

fn parse<T: DeserializeOwned>(command: CommandKind, v: &serde_json::Value) -> Result<T> {
    serde_json::from_value(v.clone())
        .map_err(|e| Error::Validation(format!("invalid params for `{}`: {e}", command.name())))
}

impl Params {
    pub fn from_table(command: CommandKind, table: &serde_json::Value) -> Result<Self> {
        if !table.is_object() {
            return Err(Error::Validation("`params` must be a JSON object".into()));
        }
        Ok(match command {
            CommandKind::Soliton => Params::Soliton(parse(command, table)?),
            CommandKind::Spectrum => Params::Spectrum(parse(command, table)?),
            CommandKind::Flow => Params::Flow(parse(command, table)?),
            CommandKind::Modes => Params::Modes(parse(command, table)?),
            CommandKind::Ancient => Params::Ancient(parse(command, table)?),
            CommandKind::Density => Params::Density(parse(command, table)?),
            CommandKind::Avoid => Params::Avoid(parse(command, table)?),
            CommandKind::Report => Params::Report(parse(command, table)?),
        })
    }

    pub fn command(&self) -> CommandKind {
        match self {
            Params::Soliton(_) => CommandKind::Soliton,
            Params::Spectrum(_) => CommandKind::Spectrum,
            Params::Flow(_) => CommandKind::Flow,
            Params::Modes(_) => CommandKind::Modes,
            Params::Ancient(_) => CommandKind::Ancient,
            Params::Density(_) => CommandKind::Density,
            Params::Avoid(_) => CommandKind::Avoid,
            Params::Report(_) => CommandKind::Report,
        }
    }

    /// Fully resolved parameter table, defaults included.
    pub fn to_table(&self) -> Result<serde_json::Value> {
        Ok(match self {
            Params::Soliton(p) => serde_json::to_value(p)?,
            Params::Spectrum(p) => serde_json::to_value(p)?,
            Params::Flow(p) => serde_json::to_value(p)?,
            Params::Modes(p) => serde_json::to_value(p)?,
            Params::Ancient(p) => serde_json::to_value(p)?,
            Params::Density(p) => serde_json::to_value(p)?,
            Params::Avoid(p) => serde_json::to_value(p)?,
            Params::Report(p) => serde_json::to_value(p)?,
        })
    }
}

/// What the digest covers: everything that can change an output byte.
#[derive(Debug, Serialize)]
pub struct DigestInput<'a> {
    pub command: CommandKind,
    pub params: &'a serde_json::Value,
    pub seed: u64,
    pub formats: &'a [Format],
    pub version: &'a str,
}

// ---------------------------------------------------------------------------
// bases

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Base {
    Sphere,
    Cylinder,
    Torus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseSpec {
    pub base: Base,
    pub n: usize,
    pub m: usize,
    pub x_max: f64,
    pub torus_bracket: [f64; 2],
    pub torus_tol: f64,
}

impl BaseSpec {
    pub fn build(&self) -> Result<SymmetricSoliton> {
        self.build_at(self.m)
    }

    pub fn build_at(&self, m: usize) -> Result<SymmetricSoliton> {
        match self.base {
            Base::Sphere => build_sphere(self.n, m),
            Base::Cylinder => build_cylinder(self.n, self.x_max, m),
            Base::Torus => {
                find_torus(self.n, self.torus_bracket, self.torus_tol, &TorusConfig { m, ..Default::default() })
            }
        }
    }
}

macro_rules! base_spec {
    ($t:ty) => {
        impl $t {
            pub fn base_spec(&self) -> BaseSpec {
                BaseSpec {
                    base: self.base,
                    n: self.n,
                    m: self.m,
                    x_max: self.x_max,
                    torus_bracket: [self.torus_lo, self.torus_hi],
                    torus_tol: self.torus_tol,
                }
            }
        }
    };
}

// ---------------------------------------------------------------------------
// per-command parameters

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SolitonBase {
    Sphere,
    Cylinder,
    Torus,
    ConicalEnd,
    Expander,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields, default)]
pub struct SolitonParams {
    #[arg(long, value_enum, default_value_t = SolitonBase::Sphere)]
    pub base: SolitonBase,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub m: usize,
    #[arg(long, default_value_t = 8.0)]
    pub x_max: f64,
    /// Residual bound; defaults to 1e-8 (sphere), 1e-10 (cylinder), 1e-3 (others).
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 3.2)]
    pub torus_lo: f64,
    #[arg(long, default_value_t = 3.4)]
    pub torus_hi: f64,
    #[arg(long, default_value_t = 1.0)]
    pub cone_slope: f64,
    #[arg(long, default_value_t = 5.0)]
    pub r0: f64,
    #[arg(long, default_value_t = 50.0)]
    pub r1: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub ds: f64,
    /// Arclength of the expander shot.
    #[arg(long, default_value_t = 10.0)]
    pub s_max: f64,
    #[arg(long, default_value_t = 0.1)]
    pub slope_tol_w: f64,
    #[arg(long, default_value_t = 0.15)]
    pub slope_tol_dw: f64,
}

impl Default for SolitonParams {
    fn default() -> Self {
        SolitonParams {
            base: SolitonBase::Sphere,
            n: 2,
            m: 1000,
            x_max: 8.0,
            tol: None,
            torus_lo: 3.2,
            torus_hi: 3.4,
            cone_slope: 1.0,
            r0: 5.0,
            r1: 50.0,
            ds: 1e-3,
            s_max: 10.0,
            slope_tol_w: 0.1,
            slope_tol_dw: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumParams {
    #[arg(long, value_enum, default_value_t = Base::Sphere)]
    pub base: Base,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 800)]
    pub m: usize,
    #[arg(long, default_value_t = 8.0)]
    pub x_max: f64,
    #[arg(long, default_value_t = 3.2)]
    pub torus_lo: f64,
    #[arg(long, default_value_t = 3.4)]
    pub torus_hi: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub torus_tol: f64,
    #[arg(long, default_value_t = 4)]
    pub count: usize,
    /// Richardson extrapolation against a solve on `2m` nodes.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub refine: bool,
    #[arg(long, default_value_t = 1e-4)]
    pub kappa: f64,
    #[arg(long, default_value_t = 8)]
    pub trials: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub structural_tol: f64,
}

impl Default for SpectrumParams {
    fn default() -> Self {
        SpectrumParams {
            base: Base::Sphere,
            n: 2,
            m: 800,
            x_max: 8.0,
            torus_lo: 3.2,
            torus_hi: 3.4,
            torus_tol: 1e-3,
            count: 4,
            refine: true,
            kappa: 1e-4,
            trials: 8,
            structural_tol: 1e-3,
        }
    }
}
base_spec!(SpectrumParams);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields, default)]
pub struct FlowParams {
    #[arg(long, value_enum, default_value_t = Base::Sphere)]
    pub base: Base,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 400)]
    pub m: usize,
    #[arg(long, default_value_t = 8.0)]
    pub x_max: f64,
    #[arg(long, default_value_t = 3.2)]
    pub torus_lo: f64,
    #[arg(long, default_value_t = 3.4)]
    pub torus_hi: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub torus_tol: f64,
    /// `const:a`, `phi1:a`, `tilt:a` or `gauss:a`.
    #[arg(long, default_value = "const:0.01")]
    pub u0: String,
    #[arg(long, default_value_t = 0.0)]
    pub tau0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub span: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dtau: f64,
    #[arg(long)]
    pub sup_limit: Option<f64>,
    /// Oracle comparison only while `sup |u|` stays below this.
    #[arg(long, default_value_t = 0.1)]
    pub oracle_sup: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub oracle_tol: f64,
    /// Every `stride`-th state goes into the trajectory table.
    #[arg(long, default_value_t = 50)]
    pub stride: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            base: Base::Sphere,
            n: 2,
            m: 400,
            x_max: 8.0,
            torus_lo: 3.2,
            torus_hi: 3.4,
            torus_tol: 1e-3,
            u0: "const:0.01".into(),
            tau0: 0.0,
            span: 1.0,
            dtau: 1e-3,
            sup_limit: None,
            oracle_sup: 0.1,
            oracle_tol: 1e-2,
            stride: 50,
        }
    }
}
base_spec!(FlowParams);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields, default)]
pub struct ModesParams {
    #[arg(long, value_enum, default_value_t = Base::Sphere)]
    pub base: Base,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 400)]
    pub m: usize,
    #[arg(long, default_value_t = 8.0)]
    pub x_max: f64,
    #[arg(long, default_value_t = 3.2)]
    pub torus_lo: f64,
    #[arg(long, default_value_t = 3.4)]
    pub torus_hi: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub torus_tol: f64,
    #[arg(long, default_value = "const:0.01")]
    pub u0: String,
    #[arg(long, default_value_t = 10.0)]
    pub span: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dtau: f64,
    #[arg(long, default_value_t = 0.1)]
    pub sup_limit: f64,
    #[arg(long, default_value_t = 8)]
    pub count: usize,
    #[arg(long, default_value_t = 0.02)]
    pub delta0: f64,
    /// Repeats the run with `(dtau / 2, 2m)` and compares fitted constants.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub refine: bool,
    #[arg(long, default_value_t = 0.25)]
    pub drift_tol: f64,
    #[arg(long, default_value_t = 1e3)]
    pub c_max: f64,
}

impl Default for ModesParams {
    fn default() -> Self {
        ModesParams {
            base: Base::Sphere,
            n: 2,
            m: 400,
            x_max: 8.0,
            torus_lo: 3.2,
            torus_hi: 3.4,
            torus_tol: 1e-3,
            u0: "const:0.01".into(),
            span: 10.0,
            dtau: 1e-3,
            sup_limit: 0.1,
            count: 8,
            delta0: 0.02,
            refine: true,
            drift_tol: 0.25,
            c_max: 1e3,
        }
    }
}
base_spec!(ModesParams);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields, default)]
pub struct AncientParams {
    #[arg(long, value_enum, default_value_t = Base::Sphere)]
    pub base: Base,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 200)]
    pub m: usize,
    #[arg(long, default_value_t = 8.0)]
    pub x_max: f64,
    #[arg(long, default_value_t = 3.2)]
    pub torus_lo: f64,
    #[arg(long, default_value_t = 3.4)]
    pub torus_hi: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub torus_tol: f64,
    #[arg(long, default_value_t = 8)]
    pub count: usize,
    /// Seed coefficients on the leading unstable modes.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = vec![1e-3, 0.0])]
    pub a: Vec<f64>,
    #[arg(long, default_value_t = -12.0, allow_negative_numbers = true)]
    pub tau_min: f64,
    #[arg(long, default_value_t = 0.01)]
    pub dtau: f64,
    #[arg(long)]
    pub delta0: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub eps_seed_factor: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 20)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-13)]
    pub e_floor: f64,
    #[arg(long, default_value_t = 6)]
    pub iteration_bound: usize,
    #[arg(long, default_value_t = 0.5)]
    pub ratio_bound: f64,
    /// Extra runs at `a / 2^k`, `k = 1..=halvings`, for the quadratic fit.
    #[arg(long, default_value_t = 0)]
    pub halvings: usize,
    #[arg(long, default_value_t = 0.25)]
    pub mu_drift_tol: f64,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub forward_check: bool,
    #[arg(long, default_value_t = 4)]
    pub substeps: usize,
}

impl Default for AncientParams {
    fn default() -> Self {
        AncientParams {
            base: Base::Sphere,
            n: 2,
            m: 200,
            x_max: 8.0,
            torus_lo: 3.2,
            torus_hi: 3.4,
            torus_tol: 1e-3,
            count: 8,
            a: vec![1e-3, 0.0],
            tau_min: -12.0,
            dtau: 0.01,
            delta0: None,
            eps_seed_factor: 1.0,
            tol: 1e-8,
            max_iter: 20,
            e_floor: 1e-13,
            iteration_bound: 6,
            ratio_bound: 0.5,
            halvings: 0,
            mu_drift_tol: 0.25,
            forward_check: true,
            substeps: 4,
        }
    }
}
base_spec!(AncientParams);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum DensityBase {
    Sphere,
    Cylinder,
    Plane,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields, default)]
pub struct DensityParams {
    #[arg(long, value_enum, default_value_t = DensityBase::Sphere)]
    pub base: DensityBase,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub m: usize,
    #[arg(long, default_value_t = 8.0)]
    pub x_max: f64,
    #[arg(long, default_value_t = 20.0)]
    pub plane_radius: f64,
    #[arg(long, default_value_t = 41)]
    pub n_x0: usize,
    #[arg(long, default_value_t = 41)]
    pub n_t0: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub t0_min: f64,
    #[arg(long, default_value_t = 1e2)]
    pub t0_max: f64,
    #[arg(long, default_value_t = 3)]
    pub rounds: usize,
    #[arg(long, default_value_t = 0.1)]
    pub r_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub r_max: f64,
    #[arg(long, default_value_t = 10)]
    pub r_count: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub theta_tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub integrand_tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub slack: f64,
}

impl Default for DensityParams {
    fn default() -> Self {
        DensityParams {
            base: DensityBase::Sphere,
            n: 2,
            m: 1000,
            x_max: 8.0,
            plane_radius: 20.0,
            n_x0: 41,
            n_t0: 41,
            t0_min: 1e-2,
            t0_max: 1e2,
            rounds: 3,
            r_min: 0.1,
            r_max: 1.0,
            r_count: 10,
            theta_tol: 1e-4,
            integrand_tol: 1e-6,
            slack: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Scenario {
    /// Round spheres about the origin.
    Concentric,
    /// Equal spheres centered at `∓offset` on the axis.
    Offset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum FrankelCase {
    SphereCylinder,
    SphereTorus,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields, default)]
pub struct AvoidParams {
    #[arg(long, value_enum, default_value_t = Scenario::Concentric)]
    pub scenario: Scenario,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Radii at `t = a` (concentric) or the common radius (offset, `r_a`).
    #[arg(long, default_value_t = 1.0)]
    pub r_a: f64,
    #[arg(long, default_value_t = 2.0)]
    pub r_b: f64,
    #[arg(long, default_value_t = 1.5)]
    pub offset: f64,
    #[arg(long, default_value_t = 5.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long, default_value_t = 0.2, allow_negative_numbers = true)]
    pub b: f64,
    #[arg(long, default_value_t = 4)]
    pub steps: usize,
    #[arg(long, default_value_t = 200)]
    pub m: usize,
    #[arg(long, default_value_t = 64)]
    pub cells: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub closed_form_tol: f64,
    /// Exponent of the field in the operator check.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 15)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = FrankelCase::SphereCylinder)]
    pub frankel: FrankelCase,
    #[arg(long, default_value_t = 400)]
    pub frankel_m: usize,
}

impl Default for AvoidParams {
    fn default() -> Self {
        AvoidParams {
            scenario: Scenario::Concentric,
            n: 2,
            r_a: 1.0,
            r_b: 2.0,
            offset: 1.5,
            radius: 5.0,
            gamma: 1.0,
            a: 0.0,
            b: 0.2,
            steps: 4,
            m: 200,
            cells: 64,
            tol: 1e-6,
            closed_form_tol: 1e-6,
            alpha: 1.0,
            samples: 15,
            frankel: FrankelCase::SphereCylinder,
            frankel_m: 400,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields, default)]
pub struct ReportParams {
    /// Run directories, each holding a manifest.
    pub dirs: Vec<PathBuf>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    #[derive(Parser)]
    struct Probe<T: Args> {
        #[command(flatten)]
        p: T,
    }

    fn flag_defaults<T: Args>() -> T {
        Probe::<T>::try_parse_from(["probe"]).unwrap().p
    }

    #[test]
    fn flag_defaults_match_file_defaults() {
        assert_eq!(flag_defaults::<SolitonParams>(), SolitonParams::default());
        assert_eq!(flag_defaults::<SpectrumParams>(), SpectrumParams::default());
        assert_eq!(flag_defaults::<FlowParams>(), FlowParams::default());
        assert_eq!(flag_defaults::<ModesParams>(), ModesParams::default());
        assert_eq!(flag_defaults::<AncientParams>(), AncientParams::default());
        assert_eq!(flag_defaults::<DensityParams>(), DensityParams::default());
        assert_eq!(flag_defaults::<AvoidParams>(), AvoidParams::default());
        assert_eq!(flag_defaults::<ReportParams>(), ReportParams::default());
    }

    #[test]
    fn empty_table_gives_defaults() {
        let p = Params::from_table(CommandKind::Spectrum, &empty_table()).unwrap();
        assert_eq!(p, Params::Spectrum(SpectrumParams::default()));
    }

    #[test]
    fn unknown_and_mistyped_keys_are_rejected() {
        let bad = serde_json::json!({"mm": 10});
        let e = Params::from_table(CommandKind::Spectrum, &bad).unwrap_err();
        assert!(matches!(e, Error::Validation(_)) && e.to_string().contains("mm"), "{e}");
        let bad = serde_json::json!({"m": "many"});
        assert!(Params::from_table(CommandKind::Spectrum, &bad).is_err());
        assert!(Params::from_table(CommandKind::Flow, &serde_json::json!([1])).is_err());
    }

    #[test]
    fn run_config_round_trip() {
        let text = r#"{"command": "avoid", "params": {"alpha": 0.0}, "seed": 7}"#;
        let c: RunConfig = serde_json::from_str(text).unwrap();
        assert_eq!(c.command, CommandKind::Avoid);
        assert_eq!(c.formats, default_formats());
        let p = Params::from_table(c.command, &c.params).unwrap();
        let Params::Avoid(a) = p else { panic!() };
        assert_eq!(a.alpha, 0.0);
        assert!(serde_json::from_str::<RunConfig>(r#"{"command": "avoid", "extra": 1}"#).is_err());
    }
}
