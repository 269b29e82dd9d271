//! Flat `section.key = value` run configuration.
//!
//! One format covers every stage: `#` starts a comment, blank lines are
//! skipped, unknown keys are errors so a typo cannot silently fall back to a
//! default. Every command writes the fully-resolved configuration it acted
//! on next to its outputs, and this same parser reads that file back — so
//! rerunning from a saved config reproduces the run.

use std::fmt::Write as _;
use std::str::FromStr;

use gpvol::evaluation::experiments::ExperimentSet;
use gpvol::{FilterConfig, GpParams, SchedulerMethod, SurfaceConfig, WeightMode};

/// Union of every stage's knobs. Sections: `surface.*` for the synthetic
/// generator, `filter.*` for quote exclusion, `data.*` for partition
/// geometry, `gp.*` for evolution parameters, `run.*` for protocol choice
/// and seeding.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub surface: SurfaceConfig,
    pub filter: FilterConfig,
    pub gp: GpParams,
    /// Chronological sample count the dataset is split into.
    pub ts_blocks: usize,
    pub method: Option<SchedulerMethod>,
    /// Subset family for dynamic runs.
    pub protocol: Option<ExperimentSet>,
    /// Training-subset label for static runs, e.g. `S4` or `C2`.
    pub subset: Option<String>,
    /// Independent seeded attempts per run; the best by test error is kept.
    pub n_seeds: usize,
    /// All per-seed engine and scheduler seeds derive from this value.
    pub base_seed: u64,
    pub weight_mode: WeightMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            surface: SurfaceConfig::default(),
            filter: FilterConfig::default(),
            gp: GpParams::default(),
            ts_blocks: 10,
            method: None,
            protocol: None,
            subset: None,
            n_seeds: 10,
            base_seed: 42,
            weight_mode: WeightMode::default(),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| format!("bad value `{value}` for {key}: {e}"))
}

fn parse_protocol(value: &str) -> Result<ExperimentSet, String> {
    match value.to_ascii_lowercase().as_str() {
        "ts" => Ok(ExperimentSet::TsSeries),
        "mtm" => Ok(ExperimentSet::MtmClasses),
        "global" => Ok(ExperimentSet::Global),
        _ => Err(format!("unknown protocol `{value}` (expected ts, mtm or global)")),
    }
}

fn protocol_name(set: ExperimentSet) -> &'static str {
    match set {
        ExperimentSet::TsSeries => "ts",
        ExperimentSet::MtmClasses => "mtm",
        ExperimentSet::Global => "global",
    }
}

impl RunConfig {
    /// Applies one `section.key=value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "surface.n_records" => self.surface.n_records = parse_value(key, value)?,
            "surface.base_vol" => self.surface.base_vol = parse_value(key, value)?,
            "surface.smile_coeff" => self.surface.smile_coeff = parse_value(key, value)?,
            "surface.term_coeff" => self.surface.term_coeff = parse_value(key, value)?,
            "surface.noise_sd" => self.surface.noise_sd = parse_value(key, value)?,
            "surface.spot" => self.surface.spot = parse_value(key, value)?,
            "surface.rate" => self.surface.rate = parse_value(key, value)?,
            "surface.date_span_days" => self.surface.date_span_days = parse_value(key, value)?,
            "surface.seed" => self.surface.seed = parse_value(key, value)?,
            "filter.min_maturity_days" => self.filter.min_maturity_days = parse_value(key, value)?,
            "filter.min_mid_quote" => self.filter.min_mid_quote = parse_value(key, value)?,
            "filter.moneyness_min" => self.filter.moneyness_min = parse_value(key, value)?,
            "filter.moneyness_max" => self.filter.moneyness_max = parse_value(key, value)?,
            "filter.enforce_arbitrage_bound" => {
                self.filter.enforce_arbitrage_bound = parse_value(key, value)?
            }
            "data.ts_blocks" => self.ts_blocks = parse_value(key, value)?,
            "gp.population_size" => self.gp.population_size = parse_value(key, value)?,
            "gp.offspring_count" => self.gp.offspring_count = parse_value(key, value)?,
            "gp.generations_static" => self.gp.generations_static = parse_value(key, value)?,
            "gp.generations_dynamic" => self.gp.generations_dynamic = parse_value(key, value)?,
            "gp.epoch_length" => self.gp.epoch_length = parse_value(key, value)?,
            "gp.tournament_size" => self.gp.tournament_size = parse_value(key, value)?,
            "gp.p_crossover" => self.gp.p_crossover = parse_value(key, value)?,
            "gp.p_branch_mutation" => self.gp.p_branch_mutation = parse_value(key, value)?,
            "gp.p_point_mutation" => self.gp.p_point_mutation = parse_value(key, value)?,
            "gp.p_expansion_mutation" => self.gp.p_expansion_mutation = parse_value(key, value)?,
            "gp.init_depth_min" => self.gp.init_depth_min = parse_value(key, value)?,
            "gp.init_depth_max" => self.gp.init_depth_max = parse_value(key, value)?,
            "run.method" => self.method = Some(parse_value(key, value)?),
            "run.protocol" => self.protocol = Some(parse_protocol(value)?),
            "run.subset" => self.subset = Some(value.to_string()),
            "run.n_seeds" => self.n_seeds = parse_value(key, value)?,
            "run.base_seed" => self.base_seed = parse_value(key, value)?,
            "run.weight_mode" => self.weight_mode = parse_value(key, value)?,
            _ => return Err(format!("unknown config key `{key}`")),
        }
        Ok(())
    }

    /// Parses a whole config file's text.
    pub fn apply_text(&mut self, text: &str) -> Result<(), String> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`, got `{line}`", idx + 1))?;
            self.set(key.trim(), value.trim()).map_err(|e| format!("line {}: {e}", idx + 1))?;
        }
        Ok(())
    }

    /// The full configuration as the same text [`RunConfig::apply_text`]
    /// accepts. Optional run keys appear only once chosen, so a dataset's
    /// config does not pin run-stage decisions. The engine's per-seed values
    /// derive from `run.base_seed` and are not separate keys.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let w = &mut out;
        writeln!(w, "# gpvol {}", env!("CARGO_PKG_VERSION")).unwrap();
        writeln!(w, "surface.n_records = {}", self.surface.n_records).unwrap();
        writeln!(w, "surface.base_vol = {}", self.surface.base_vol).unwrap();
        writeln!(w, "surface.smile_coeff = {}", self.surface.smile_coeff).unwrap();
        writeln!(w, "surface.term_coeff = {}", self.surface.term_coeff).unwrap();
        writeln!(w, "surface.noise_sd = {}", self.surface.noise_sd).unwrap();
        writeln!(w, "surface.spot = {}", self.surface.spot).unwrap();
        writeln!(w, "surface.rate = {}", self.surface.rate).unwrap();
        writeln!(w, "surface.date_span_days = {}", self.surface.date_span_days).unwrap();
        writeln!(w, "surface.seed = {}", self.surface.seed).unwrap();
        writeln!(w, "filter.min_maturity_days = {}", self.filter.min_maturity_days).unwrap();
        writeln!(w, "filter.min_mid_quote = {}", self.filter.min_mid_quote).unwrap();
        writeln!(w, "filter.moneyness_min = {}", self.filter.moneyness_min).unwrap();
        writeln!(w, "filter.moneyness_max = {}", self.filter.moneyness_max).unwrap();
        writeln!(w, "filter.enforce_arbitrage_bound = {}", self.filter.enforce_arbitrage_bound)
            .unwrap();
        writeln!(w, "data.ts_blocks = {}", self.ts_blocks).unwrap();
        writeln!(w, "gp.population_size = {}", self.gp.population_size).unwrap();
        writeln!(w, "gp.offspring_count = {}", self.gp.offspring_count).unwrap();
        writeln!(w, "gp.generations_static = {}", self.gp.generations_static).unwrap();
        writeln!(w, "gp.generations_dynamic = {}", self.gp.generations_dynamic).unwrap();
        writeln!(w, "gp.epoch_length = {}", self.gp.epoch_length).unwrap();
        writeln!(w, "gp.tournament_size = {}", self.gp.tournament_size).unwrap();
        writeln!(w, "gp.p_crossover = {}", self.gp.p_crossover).unwrap();
        writeln!(w, "gp.p_branch_mutation = {}", self.gp.p_branch_mutation).unwrap();
        writeln!(w, "gp.p_point_mutation = {}", self.gp.p_point_mutation).unwrap();
        writeln!(w, "gp.p_expansion_mutation = {}", self.gp.p_expansion_mutation).unwrap();
        writeln!(w, "gp.init_depth_min = {}", self.gp.init_depth_min).unwrap();
        writeln!(w, "gp.init_depth_max = {}", self.gp.init_depth_max).unwrap();
        writeln!(w, "run.n_seeds = {}", self.n_seeds).unwrap();
        writeln!(w, "run.base_seed = {}", self.base_seed).unwrap();
        writeln!(w, "run.weight_mode = {}", self.weight_mode).unwrap();
        if let Some(method) = self.method {
            writeln!(w, "run.method = {method}").unwrap();
        }
        if let Some(protocol) = self.protocol {
            writeln!(w, "run.protocol = {}", protocol_name(protocol)).unwrap();
        }
        if let Some(subset) = &self.subset {
            writeln!(w, "run.subset = {subset}").unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_round_trips_through_apply_text() {
        let mut cfg = RunConfig::default();
        cfg.set("surface.n_records", "400").unwrap();
        cfg.set("surface.base_vol", "0.21").unwrap();
        cfg.set("filter.enforce_arbitrage_bound", "false").unwrap();
        cfg.set("data.ts_blocks", "4").unwrap();
        cfg.set("gp.p_crossover", "0.7").unwrap();
        cfg.set("run.method", "arss").unwrap();
        cfg.set("run.protocol", "global").unwrap();
        cfg.set("run.weight_mode", "best-on-all").unwrap();

        let mut back = RunConfig::default();
        back.apply_text(&cfg.render()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.render(), cfg.render());
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("# comment\n\n  surface.seed = 9  \n").unwrap();
        assert_eq!(cfg.surface.seed, 9);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected_with_line_numbers() {
        let mut cfg = RunConfig::default();
        let err = cfg.apply_text("surface.n_records = 10\nsurface.typo = 1\n").unwrap_err();
        assert!(err.contains("line 2"), "{err}");
        assert!(err.contains("surface.typo"), "{err}");

        let err = cfg.apply_text("gp.population_size = many").unwrap_err();
        assert!(err.contains("bad value `many`"), "{err}");

        let err = cfg.apply_text("no equals sign").unwrap_err();
        assert!(err.contains("key = value"), "{err}");
    }

    #[test]
    fn method_and_protocol_parse_case_insensitively() {
        let mut cfg = RunConfig::default();
        cfg.set("run.method", "ASSS").unwrap();
        assert_eq!(cfg.method, Some(SchedulerMethod::Asss));
        cfg.set("run.protocol", "MTM").unwrap();
        assert_eq!(cfg.protocol, Some(ExperimentSet::MtmClasses));
        assert!(cfg.set("run.protocol", "everything").is_err());
    }
}
