//! Resolved run settings: defaults, then a flat `key = value` file, then flags.

use condens::evaluation::EstimatorSettings;
use condens::marginal::NeighborhoodRate;
use condens::{EstimatorKind, Example, ExampleId, GridMode, PenaltyForm, RiskConfig};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct Settings {
    pub example: Example,
    pub estimator: EstimatorKind,
    pub x: f64,
    pub n: usize,
    pub eta: f64,
    pub fx_known: bool,
    pub reps: usize,
    pub seed: u64,
    pub strict_grid: bool,
    pub clamp_nonneg: bool,
    pub truth: bool,
    pub quadrature_points: usize,
    pub grid_points: usize,
    pub etas: Option<Vec<f64>>,
    pub preset: Option<String>,
    pub cells: Option<String>,
    pub estimator_settings: EstimatorSettings,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            example: ExampleId::Ex1.into(),
            estimator: EstimatorKind::Kernel,
            x: 0.5,
            n: 1000,
            eta: 1.0,
            fx_known: false,
            reps: 100,
            seed: 0,
            strict_grid: false,
            clamp_nonneg: false,
            truth: false,
            quadrature_points: 2048,
            grid_points: 512,
            etas: None,
            preset: None,
            cells: None,
            estimator_settings: EstimatorSettings::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value `{value}` for `{key}`"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, String> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" | "known" => Ok(true),
        "false" | "no" | "0" | "off" | "unknown" => Ok(false),
        _ => Err(format!("invalid boolean `{value}` for `{key}`")),
    }
}

fn parse_mode(key: &str, value: &str) -> Result<GridMode, String> {
    match value.to_ascii_lowercase().as_str() {
        "practical" => Ok(GridMode::Practical),
        "strict" => Ok(GridMode::Strict),
        _ => Err(format!("invalid grid mode `{value}` for `{key}` (practical|strict)")),
    }
}

fn mode_name(m: GridMode) -> &'static str {
    match m {
        GridMode::Practical => "practical",
        GridMode::Strict => "strict",
    }
}

/// Comma-separated reals.
pub fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, String> {
    let out = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse::<f64>(key, s))
        .collect::<Result<Vec<_>, _>>()?;
    if out.is_empty() {
        return Err(format!("`{key}` is an empty list"));
    }
    Ok(out)
}

impl Settings {
    /// Applies one setting. Keys accept `-` or `_` as the word separator.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let k = key.as_str();
        let es = &mut self.estimator_settings;
        match k {
            "example" => self.example = value.parse().map_err(|e| format!("{e}"))?,
            "estimator" => self.estimator = value.parse().map_err(|e| format!("{e}"))?,
            "x" => self.x = parse(k, value)?,
            "n" => self.n = parse(k, value)?,
            "eta" => self.eta = parse(k, value)?,
            "fx_known" => self.fx_known = parse_bool(k, value)?,
            "reps" | "replications" => self.reps = parse(k, value)?,
            "seed" | "base_seed" => self.seed = parse(k, value)?,
            "strict_grid" => self.strict_grid = parse_bool(k, value)?,
            "clamp_nonneg" => self.clamp_nonneg = parse_bool(k, value)?,
            "truth" => self.truth = parse_bool(k, value)?,
            "quadrature_points" => self.quadrature_points = parse(k, value)?,
            "grid_points" => self.grid_points = parse(k, value)?,
            "etas" => self.etas = Some(parse_list(k, value)?),
            "preset" => self.preset = Some(value.to_string()),
            "cells" => self.cells = Some(value.to_string()),
            "kernel_grid" => es.kernel_grid = parse_mode(k, value)?,
            "projection_grid" => es.projection_grid = parse_mode(k, value)?,
            "kernel_grid_size" => es.kernel_grid_size = parse(k, value)?,
            "r" => es.r = parse(k, value)?,
            "r_y" => es.r_y = parse(k, value)?,
            "penalty" => {
                es.penalty = match value.to_ascii_lowercase().as_str() {
                    "simplified" => PenaltyForm::Simplified,
                    "full" => PenaltyForm::Full,
                    _ => return Err(format!("invalid penalty `{value}` (simplified|full)")),
                }
            }
            "marginal_a" => es.marginal.neighborhood_halfwidth_a = parse(k, value)?,
            "marginal_grid_size" => es.marginal.grid_size = parse(k, value)?,
            "marginal_tuning" => es.marginal.tuning_constant = parse(k, value)?,
            "marginal_points" => es.marginal.neighborhood_grid_points = parse(k, value)?,
            "k_n" => {
                es.marginal.k_n = if value.eq_ignore_ascii_case("log") {
                    NeighborhoodRate::LogN
                } else {
                    NeighborhoodRate::Fixed(parse(k, value)?)
                }
            }
            "delta_floor" => {
                es.marginal.delta_floor = if value.eq_ignore_ascii_case("auto") {
                    None
                } else {
                    Some(parse(k, value)?)
                }
            }
            _ => return Err(format!("unknown setting `{key}`")),
        }
        Ok(())
    }

    /// Reads a flat `key = value` file; `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), String> {
        let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("{}:{}: expected `key = value`", path.display(), lineno + 1))?;
            self.apply(k, v)
                .map_err(|e| format!("{}:{}: {e}", path.display(), lineno + 1))?;
        }
        Ok(())
    }

    /// Estimator settings after `strict_grid`, which forces both rules onto
    /// their theoretical grids.
    pub fn resolved_estimator_settings(&self) -> EstimatorSettings {
        let mut es = self.estimator_settings.clone();
        if self.strict_grid {
            es.kernel_grid = GridMode::Strict;
            es.projection_grid = GridMode::Strict;
        }
        es
    }

    pub fn risk_config(
        &self,
        example: Example,
        estimator: EstimatorKind,
        x: f64,
        n: usize,
        eta: f64,
        fx_known: bool,
    ) -> RiskConfig {
        let mut cfg = RiskConfig::new(example, estimator, x, n, eta);
        cfg.fx_known = fx_known;
        cfg.replications = self.reps;
        cfg.base_seed = self.seed;
        cfg.quadrature_points = self.quadrature_points;
        cfg.clamp_nonneg = self.clamp_nonneg;
        cfg.settings = self.resolved_estimator_settings();
        cfg
    }

    /// The single cell described by the scalar settings.
    pub fn cell_config(&self) -> RiskConfig {
        self.risk_config(self.example, self.estimator, self.x, self.n, self.eta, self.fx_known)
    }

    /// `key = value` echo of every resolved setting, in a fixed order.
    pub fn echo(&self) -> String {
        let es = self.resolved_estimator_settings();
        let m = &es.marginal;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("example", self.example.to_string());
        kv("estimator", self.estimator.to_string());
        kv("x", self.x.to_string());
        kv("n", self.n.to_string());
        kv("eta", self.eta.to_string());
        kv("fx_known", self.fx_known.to_string());
        kv("reps", self.reps.to_string());
        kv("seed", self.seed.to_string());
        kv("strict_grid", self.strict_grid.to_string());
        kv("clamp_nonneg", self.clamp_nonneg.to_string());
        kv("truth", self.truth.to_string());
        kv("quadrature_points", self.quadrature_points.to_string());
        kv("grid_points", self.grid_points.to_string());
        if let Some(etas) = &self.etas {
            let list: Vec<String> = etas.iter().map(f64::to_string).collect();
            kv("etas", list.join(","));
        }
        if let Some(p) = &self.preset {
            kv("preset", p.clone());
        }
        if let Some(c) = &self.cells {
            kv("cells", c.clone());
        }
        kv("kernel_grid", mode_name(es.kernel_grid).into());
        kv("projection_grid", mode_name(es.projection_grid).into());
        kv("kernel_grid_size", es.kernel_grid_size.to_string());
        kv("r", es.r.to_string());
        kv("r_y", es.r_y.to_string());
        kv(
            "penalty",
            match es.penalty {
                PenaltyForm::Simplified => "simplified",
                PenaltyForm::Full => "full",
            }
            .into(),
        );
        kv("marginal_a", m.neighborhood_halfwidth_a.to_string());
        kv("marginal_grid_size", m.grid_size.to_string());
        kv("marginal_tuning", m.tuning_constant.to_string());
        kv("marginal_points", m.neighborhood_grid_points.to_string());
        kv(
            "k_n",
            match m.k_n {
                NeighborhoodRate::LogN => "log".into(),
                NeighborhoodRate::Fixed(k) => k.to_string(),
            },
        );
        kv(
            "delta_floor",
            m.delta_floor.map_or_else(|| "auto".into(), |f| f.to_string()),
        );
        s
    }
}
