//! Scenario files: plain-text sectioned key-value configs with sections
//! `[plant] [controller] [environment] [run]`, `key = value` lines and `#`
//! comments — the same lexical rules as the chain format.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::rocking::{AdaptationConfig, RockingConfig};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {0}: {1}")]
    Syntax(usize, String),
    #[error("section [{0}]: unknown key `{1}`")]
    UnknownKey(String, String),
    #[error("key `{0}`: {1}")]
    BadValue(String, String),
    #[error("missing required key `{0}` in section [{1}]")]
    MissingKey(&'static str, &'static str),
    #[error("unknown knife preset `{0}`")]
    UnknownKnife(String),
    #[error("unknown food preset `{0}`")]
    UnknownFood(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct PlantSpec {
    /// Chain fixture path, resolved relative to the scenario file.
    pub chain: PathBuf,
    /// Frame carrying the knife.
    pub knife_frame: String,
    /// Initial joint configuration; zeros when omitted.
    pub q0: Vec<f64>,
    /// Feed gravity torques forward so the virtual mechanism only shapes
    /// motion, not weight.
    pub gravity_comp: bool,
}

#[derive(Debug, Clone)]
pub struct EnvironmentSpec {
    pub board_height: f64,
    pub k_n: f64,
    pub c_n: f64,
    pub mu_v: f64,
    /// Knife preset name.
    pub knife: String,
    /// Food preset name; None for pure rocking on a bare board.
    pub food: Option<String>,
    pub food_y: f64,
    pub food_hardness: f64,
    /// Optional mid-run hardness step: (time s, multiplicative factor).
    pub hardness_step: Option<(f64, f64)>,
    /// Wrist sensor noise sigma, N; 0 disables the noise channel.
    pub noise_sigma: f64,
}

impl Default for EnvironmentSpec {
    fn default() -> Self {
        EnvironmentSpec {
            board_height: 0.0,
            k_n: 5e4,
            c_n: 50.0,
            mu_v: 5.0,
            knife: "knife1".to_string(),
            food: None,
            food_y: 0.37,
            food_hardness: 1.0,
            hardness_step: None,
            noise_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSpec {
    pub duration: f64,
    pub dt: f64,
    pub seed: u64,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec { duration: 20.0, dt: 1e-3, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub plant: PlantSpec,
    pub controller: RockingConfig,
    pub environment: EnvironmentSpec,
    pub run: RunSpec,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.run.duration < 0.0 || self.run.dt <= 0.0 {
            return Err(ScenarioError::Invalid("duration must be >= 0 and dt > 0".into()));
        }
        if crate::environment::BladeProfile::preset(&self.environment.knife).is_none() {
            return Err(ScenarioError::UnknownKnife(self.environment.knife.clone()));
        }
        if let Some(food) = &self.environment.food {
            if crate::environment::FoodItem::preset(food, 0.0, 1).is_none() {
                return Err(ScenarioError::UnknownFood(food.clone()));
            }
        }
        self.controller
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        Ok(())
    }
}

/// Raw sections: name -> ordered (key, value) pairs.
type Sections = HashMap<String, Vec<(String, String)>>;

fn split_sections(text: &str) -> Result<Sections, ScenarioError> {
    let mut sections: Sections = HashMap::new();
    let mut current: Option<String> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let line = line.trim_end();
        if line.trim().is_empty() {
            continue;
        }
        let trimmed = line.trim();
        if trimmed.starts_with('[') && trimmed.ends_with(']') {
            let name = trimmed[1..trimmed.len() - 1].trim().to_string();
            if !matches!(name.as_str(), "plant" | "controller" | "environment" | "run") {
                return Err(ScenarioError::Syntax(
                    lineno + 1,
                    format!("unknown section [{name}]"),
                ));
            }
            sections.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let section = current.as_ref().ok_or_else(|| {
            ScenarioError::Syntax(lineno + 1, "key before any section header".into())
        })?;
        let (key, value) = trimmed.split_once('=').ok_or_else(|| {
            ScenarioError::Syntax(lineno + 1, format!("expected `key = value`, got `{trimmed}`"))
        })?;
        sections
            .get_mut(section)
            .unwrap()
            .push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(sections)
}

struct SectionReader<'a> {
    name: &'a str,
    pairs: HashMap<&'a str, &'a str>,
    seen: std::cell::RefCell<std::collections::HashSet<String>>,
}

impl<'a> SectionReader<'a> {
    fn new(name: &'a str, pairs: &'a [(String, String)]) -> Self {
        let map = pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
        SectionReader { name, pairs: map, seen: Default::default() }
    }

    fn f64(&self, key: &str, default: f64) -> Result<f64, ScenarioError> {
        self.seen.borrow_mut().insert(key.to_string());
        match self.pairs.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| ScenarioError::BadValue(key.into(), format!("not a number: `{v}`"))),
        }
    }

    fn usize(&self, key: &str, default: usize) -> Result<usize, ScenarioError> {
        self.seen.borrow_mut().insert(key.to_string());
        match self.pairs.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| ScenarioError::BadValue(key.into(), format!("not an integer: `{v}`"))),
        }
    }

    fn bool(&self, key: &str, default: bool) -> Result<bool, ScenarioError> {
        self.seen.borrow_mut().insert(key.to_string());
        match self.pairs.get(key) {
            None => Ok(default),
            Some(&v) => match v {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(ScenarioError::BadValue(key.into(), format!("not a boolean: `{v}`"))),
            },
        }
    }

    fn string(&self, key: &str, default: &str) -> String {
        self.seen.borrow_mut().insert(key.to_string());
        self.pairs.get(key).map(|v| v.to_string()).unwrap_or_else(|| default.to_string())
    }

    fn opt_string(&self, key: &str) -> Option<String> {
        self.seen.borrow_mut().insert(key.to_string());
        self.pairs.get(key).map(|v| v.to_string())
    }

    fn floats(&self, key: &str) -> Result<Option<Vec<f64>>, ScenarioError> {
        self.seen.borrow_mut().insert(key.to_string());
        match self.pairs.get(key) {
            None => Ok(None),
            Some(v) => v
                .split_whitespace()
                .map(|tok| {
                    tok.parse().map_err(|_| {
                        ScenarioError::BadValue(key.into(), format!("not a number: `{tok}`"))
                    })
                })
                .collect::<Result<Vec<f64>, _>>()
                .map(Some),
        }
    }

    fn finish(&self) -> Result<(), ScenarioError> {
        let seen = self.seen.borrow();
        for key in self.pairs.keys() {
            if !seen.contains(*key) {
                return Err(ScenarioError::UnknownKey(self.name.into(), (*key).into()));
            }
        }
        Ok(())
    }
}

pub fn parse_scenario(text: &str, base_dir: &Path) -> Result<Scenario, ScenarioError> {
    let sections = split_sections(text)?;
    let empty = Vec::new();
    let get = |name: &str| sections.get(name).unwrap_or(&empty);

    let plant = {
        let r = SectionReader::new("plant", get("plant"));
        let chain = r
            .opt_string("chain")
            .ok_or(ScenarioError::MissingKey("chain", "plant"))?;
        let spec = PlantSpec {
            chain: base_dir.join(chain),
            knife_frame: r.string("knife_frame", "knife"),
            q0: r.floats("q0")?.unwrap_or_default(),
            gravity_comp: r.bool("gravity_comp", true)?,
        };
        r.finish()?;
        spec
    };

    let controller = {
        let d = RockingConfig::a1_uniform();
        let r = SectionReader::new("controller", get("controller"));
        let cfg = RockingConfig {
            k1: r.f64("k1", d.k1)?,
            sigma1: r.f64("sigma1", d.sigma1)?,
            c1: r.f64("c1", d.c1)?,
            k2: r.f64("k2", d.k2)?,
            sigma2: r.f64("sigma2", d.sigma2)?,
            c2: r.f64("c2", d.c2)?,
            k_ori: r.f64("k_ori", d.k_ori)?,
            sigma_ori: r.f64("sigma_ori", d.sigma_ori)?,
            c_ori: r.f64("c_ori", d.c_ori)?,
            m_a: r.f64("m_a", d.m_a)?,
            m_b: r.f64("m_b", d.m_b)?,
            m_ori: r.f64("m_ori", d.m_ori)?,
            k_b: r.f64("k_b", d.k_b)?,
            c_b: r.f64("c_b", d.c_b)?,
            r21: (r.f64("r21_y", d.r21.0)?, r.f64("r21_z", d.r21.1)?),
            r22: (r.f64("r22_y", d.r22.0)?, r.f64("r22_z", d.r22.1)?),
            delta1: r.f64("delta1", d.delta1)?,
            delta2: r.f64("delta2", d.delta2)?,
            t_min: r.f64("t_min", d.t_min)?,
            t_cut_max: r.f64("t_cut_max", d.t_cut_max)?,
            slice_thickness: r.f64("slice_thickness", d.slice_thickness)?,
            slice_count: r.usize("slice_count", d.slice_count)?,
            adaptation: AdaptationConfig {
                enabled: r.bool("adapt_enabled", false)?,
                alpha: r.f64("alpha", 50.0)?,
                z_scale: r.f64("z_scale", 0.01)?,
                k2_min: r.f64("k2_min", 20.0)?,
                k2_max: r.f64("k2_max", 400.0)?,
                period: r.usize("adapt_period", 6)?,
            },
        };
        r.finish()?;
        cfg
    };

    let environment = {
        let d = EnvironmentSpec::default();
        let r = SectionReader::new("environment", get("environment"));
        let step_t = r.f64("hardness_step_time", f64::NAN)?;
        let step_f = r.f64("hardness_step_factor", 1.0)?;
        let spec = EnvironmentSpec {
            board_height: r.f64("board_height", d.board_height)?,
            k_n: r.f64("k_n", d.k_n)?,
            c_n: r.f64("c_n", d.c_n)?,
            mu_v: r.f64("mu_v", d.mu_v)?,
            knife: r.string("knife", &d.knife),
            food: r.opt_string("food").filter(|f| f != "none"),
            food_y: r.f64("food_y", d.food_y)?,
            food_hardness: r.f64("food_hardness", d.food_hardness)?,
            hardness_step: if step_t.is_finite() { Some((step_t, step_f)) } else { None },
            noise_sigma: r.f64("noise_sigma", d.noise_sigma)?,
        };
        r.finish()?;
        spec
    };

    let run = {
        let d = RunSpec::default();
        let r = SectionReader::new("run", get("run"));
        let spec = RunSpec {
            duration: r.f64("duration", d.duration)?,
            dt: r.f64("dt", d.dt)?,
            seed: r.usize("seed", d.seed as usize)? as u64,
        };
        r.finish()?;
        spec
    };

    let scenario = Scenario { plant, controller, environment, run };
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_scenario(&text, base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const MINIMAL: &str = "\
[plant]
chain = planar3.chain

[controller]
k1 = 30        # tip stiffness
r22_y = 0.63
delta2 = 0.2

[environment]
knife = knife2
food = cucumber

[run]
duration = 12.5
seed = 7
";

    #[test]
    fn parses_minimal_scenario() {
        let s = parse_scenario(MINIMAL, Path::new("/fix")).unwrap();
        assert_eq!(s.plant.chain, Path::new("/fix/planar3.chain"));
        assert_relative_eq!(s.controller.k1, 30.0);
        assert_relative_eq!(s.controller.r22.0, 0.63);
        // untouched keys keep their defaults
        assert_relative_eq!(s.controller.k2, 150.0);
        assert_eq!(s.environment.knife, "knife2");
        assert_eq!(s.environment.food.as_deref(), Some("cucumber"));
        assert_relative_eq!(s.run.duration, 12.5);
        assert_eq!(s.run.seed, 7);
    }

    #[test]
    fn unknown_key_rejected() {
        let text = MINIMAL.replace("k1 = 30", "k1_typo = 30");
        match parse_scenario(&text, Path::new(".")) {
            Err(ScenarioError::UnknownKey(section, key)) => {
                assert_eq!(section, "controller");
                assert_eq!(key, "k1_typo");
            }
            other => panic!("expected UnknownKey, got {other:?}"),
        }
    }

    #[test]
    fn unknown_section_rejected() {
        let text = format!("{MINIMAL}\n[banana]\nk = 1\n");
        assert!(matches!(
            parse_scenario(&text, Path::new(".")),
            Err(ScenarioError::Syntax(_, _))
        ));
    }

    #[test]
    fn missing_chain_rejected() {
        let text = MINIMAL.replace("chain = planar3.chain", "");
        assert!(matches!(
            parse_scenario(&text, Path::new(".")),
            Err(ScenarioError::MissingKey("chain", "plant"))
        ));
    }

    #[test]
    fn unknown_knife_preset_rejected() {
        let text = MINIMAL.replace("knife = knife2", "knife = cleaver9");
        assert!(matches!(
            parse_scenario(&text, Path::new(".")),
            Err(ScenarioError::UnknownKnife(_))
        ));
    }

    #[test]
    fn bad_number_reported_with_key() {
        let text = MINIMAL.replace("k1 = 30        # tip stiffness", "k1 = fast");
        match parse_scenario(&text, Path::new(".")) {
            Err(ScenarioError::BadValue(key, _)) => assert_eq!(key, "k1"),
            other => panic!("expected BadValue, got {other:?}"),
        }
    }

    #[test]
    fn q0_list_and_hardness_step() {
        let text = format!(
            "{MINIMAL}\n[plant]\nq0 = 0.1 -0.2 0.3\n[environment]\nhardness_step_time = 20\nhardness_step_factor = 3\n"
        );
        let s = parse_scenario(&text, Path::new(".")).unwrap();
        assert_eq!(s.plant.q0, vec![0.1, -0.2, 0.3]);
        assert_eq!(s.environment.hardness_step, Some((20.0, 3.0)));
    }
}
