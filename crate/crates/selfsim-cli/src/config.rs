//! Run configuration: defaults, `section.key = value` files, and flag overrides.

use std::path::PathBuf;

use serde::Serialize;
use selfsim::kernels::KernelSpec;
use selfsim::profiles::Grid;
use selfsim::solver::{Normalization, SolverOptions};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Constant,
    Power,
    Brownian,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelConfig {
    pub family: KernelFamily,
    pub alpha: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub damping: f64,
    pub normalization: String,
}

/// Fully resolved configuration of one command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub kernel: KernelConfig,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    /// Norm exponent; `None` selects `(α + 1/2)/2`.
    pub theta: Option<f64>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let grid = Grid::default();
        let opts = SolverOptions::default();
        RunConfig {
            kernel: KernelConfig {
                family: KernelFamily::Power,
                alpha: 0.25,
                epsilon: 0.1,
            },
            grid: GridConfig {
                x_min: grid.x_min,
                x_max: grid.x_max,
                n: grid.n,
            },
            solver: SolverConfig {
                max_iter: opts.max_iter,
                tol: opts.tol,
                damping: opts.damping,
                normalization: "decay_rate".into(),
            },
            theta: None,
            output_dir: PathBuf::from("out"),
            seed: 20240601,
        }
    }
}

fn bad(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("invalid value for `{key}`: {msg}"))
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| bad(key, format!("cannot parse `{value}`")))
}

impl RunConfig {
    /// Sets one dotted key. Keys are `kernel.{family,alpha,epsilon}`,
    /// `grid.{x_min,x_max,n}`, `solver.{max_iter,tol,damping,normalization}`
    /// and `run.{theta,output_dir,seed}`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let value = value.trim();
        match key {
            "kernel.family" => {
                self.kernel.family = match value {
                    "constant" => KernelFamily::Constant,
                    "power" => KernelFamily::Power,
                    "brownian" => KernelFamily::Brownian,
                    other => return Err(bad(key, format!("unknown family `{other}`"))),
                }
            }
            "kernel.alpha" => self.kernel.alpha = parse_num(key, value)?,
            "kernel.epsilon" => self.kernel.epsilon = parse_num(key, value)?,
            "grid.x_min" => self.grid.x_min = parse_num(key, value)?,
            "grid.x_max" => self.grid.x_max = parse_num(key, value)?,
            "grid.n" => self.grid.n = parse_num(key, value)?,
            "solver.max_iter" => self.solver.max_iter = parse_num(key, value)?,
            "solver.tol" => self.solver.tol = parse_num(key, value)?,
            "solver.damping" => self.solver.damping = parse_num(key, value)?,
            "solver.normalization" => match value {
                "decay_rate" | "mass" => self.solver.normalization = value.to_string(),
                other => return Err(bad(key, format!("expected decay_rate or mass, got `{other}`"))),
            },
            "run.theta" => self.theta = Some(parse_num(key, value)?),
            "run.output_dir" => self.output_dir = PathBuf::from(value),
            "run.seed" => self.seed = parse_num(key, value)?,
            other => return Err(CliError::Usage(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    /// Applies a configuration file. Blank lines and lines starting with `#`
    /// are skipped; every other line must read `section.key = value`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {}: expected `section.key = value`", lineno + 1))
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    /// Checks ranges and pins the exponent of fixed families.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        match self.kernel.family {
            KernelFamily::Constant => {
                self.kernel.alpha = 0.0;
                self.kernel.epsilon = 0.0;
            }
            KernelFamily::Brownian => self.kernel.alpha = 1.0 / 3.0,
            KernelFamily::Power => {}
        }
        let alpha = self.kernel.alpha;
        if !(0.0..0.5).contains(&alpha) {
            return Err(bad("kernel.alpha", format!("{alpha} is outside [0, 1/2)")));
        }
        if !(self.kernel.epsilon >= 0.0 && self.kernel.epsilon.is_finite()) {
            return Err(bad("kernel.epsilon", "must be a finite value >= 0"));
        }
        if let Some(theta) = self.theta {
            if !(theta > alpha && theta < 0.5) {
                return Err(bad("run.theta", format!("{theta} is outside (alpha, 1/2) = ({alpha}, 0.5)")));
            }
        }
        if !(self.grid.x_min > 0.0 && self.grid.x_max > self.grid.x_min) {
            return Err(bad("grid.x_min", "need 0 < x_min < x_max"));
        }
        if self.grid.n < 16 {
            return Err(bad("grid.n", "need at least 16 nodes"));
        }
        if self.solver.max_iter == 0 {
            return Err(bad("solver.max_iter", "must be positive"));
        }
        if !(self.solver.tol > 0.0) {
            return Err(bad("solver.tol", "must be positive"));
        }
        if !(self.solver.damping > 0.0 && self.solver.damping <= 1.0) {
            return Err(bad("solver.damping", "must lie in (0, 1]"));
        }
        Ok(self)
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec, CliError> {
        let k = &self.kernel;
        let spec = match k.family {
            KernelFamily::Constant => Ok(KernelSpec::constant()),
            KernelFamily::Power => KernelSpec::power(k.alpha, k.epsilon),
            KernelFamily::Brownian => KernelSpec::brownian(k.epsilon),
        };
        spec.map_err(|e| bad("kernel", e))
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        Grid::new(self.grid.x_min, self.grid.x_max, self.grid.n).map_err(|e| bad("grid", e))
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            max_iter: self.solver.max_iter,
            tol: self.solver.tol,
            damping: self.solver.damping,
            normalization: if self.solver.normalization == "mass" {
                Normalization::Mass
            } else {
                Normalization::DecayRate
            },
            theta: self.theta,
        }
    }

    /// The exponent in use: the configured one or `(α + 1/2)/2`.
    pub fn theta_value(&self) -> f64 {
        self.theta
            .unwrap_or_else(|| selfsim::laplace::default_theta(self.kernel.alpha))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_keys() {
        let mut c = RunConfig::default();
        c.apply_text("# comment\nkernel.alpha = 0.4\n\ngrid.n=300\nrun.seed = 9\n")
            .unwrap();
        assert_eq!(c.kernel.alpha, 0.4);
        assert_eq!(c.grid.n, 300);
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn unknown_key_is_named() {
        let mut c = RunConfig::default();
        let err = c.apply_text("kernel.beta = 1").unwrap_err();
        assert!(err.to_string().contains("kernel.beta"));
    }

    #[test]
    fn range_checks_name_the_key() {
        let mut c = RunConfig::default();
        c.kernel.alpha = 0.6;
        assert!(c.clone().resolve().unwrap_err().to_string().contains("kernel.alpha"));
        c.kernel.alpha = 0.25;
        c.theta = Some(0.2);
        assert!(c.clone().resolve().unwrap_err().to_string().contains("run.theta"));
        c.theta = None;
        c.kernel.epsilon = -0.1;
        assert!(c.resolve().unwrap_err().to_string().contains("kernel.epsilon"));
    }

    #[test]
    fn constant_family_pins_parameters() {
        let mut c = RunConfig::default();
        c.kernel.family = KernelFamily::Constant;
        let c = c.resolve().unwrap();
        assert_eq!((c.kernel.alpha, c.kernel.epsilon), (0.0, 0.0));
        assert!(c.kernel_spec().unwrap().is_constant());
    }
}
