// SPDX-License-Identifier: Apache-2.0

use std::fmt;

/// Where a fixture came from.
pub const BUILTIN_MEASUREMENTS: &str = "builtin:campaign_measurements.csv";
pub const BUILTIN_EXCESS: &str = "builtin:campaign_excess_loss.csv";
pub const STDOUT: &str = "-";

/// Everything a run depends on, resolved before it starts. Rendered as `#`
/// lines at the top of every output.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub subcommand: &'static str,
    pub seed: u64,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub params: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(subcommand: &'static str, seed: u64) -> Self {
        RunManifest {
            subcommand,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            params: Vec::new(),
        }
    }

    pub fn input(&mut self, path: impl Into<String>) -> &mut Self {
        self.inputs.push(path.into());
        self
    }

    pub fn output(&mut self, path: impl Into<String>) -> &mut Self {
        self.outputs.push(path.into());
        self
    }

    pub fn param(&mut self, name: &str, value: impl fmt::Display) -> &mut Self {
        self.params.push((name.to_string(), value.to_string()));
        self
    }
}

impl fmt::Display for RunManifest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# subcommand={}", self.subcommand)?;
        writeln!(f, "# seed={}", self.seed)?;
        for i in &self.inputs {
            writeln!(f, "# input={i}")?;
        }
        for o in &self.outputs {
            writeln!(f, "# output={o}")?;
        }
        for (k, v) in &self.params {
            writeln!(f, "# param.{k}={v}")?;
        }
        Ok(())
    }
}
