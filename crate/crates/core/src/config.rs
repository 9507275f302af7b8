//! Experiment configuration and the canonical parameter file.
//!
//! The config is line-oriented `key = value` text; `#` starts a comment.
//! Keys: `q`, `k`, `outer_n`, `outer_k`, one of `field_poly` or
//! `field_prime`, `subgroup_order`, and optionally `groups` (default 20),
//! `seed` (default 0) and `fail` (default `1,2`). Integers may be written
//! in hex with a `0x` prefix.
//!
//! The parameter file is a sequence of big-endian `u64` words after an
//! 8-byte magic:
//!
//! ```text
//! "EMSCRPRM"  version
//! inner field: order, poly (0 if prime), generator; subgroup order
//! inner n, inner k
//! outer q, N, K; outer field: order, poly, generator
//! point count, points
//! seed, failed node 1, failed node 2, groups per block
//! sigma count, sigma values; lambda count, lambda values
//! ```

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::emscr::{EmscrError, EmscrParams};
use crate::field::{Fe, FieldError, FieldSpec};
use crate::mscr::{MscrError, MscrParams};
use crate::scalarcode::{ScalarCodeError, ScalarCodeSpec};
use crate::shardstore::ParamsDigest;

pub const PARAMS_MAGIC: &[u8; 8] = b"EMSCRPRM";
pub const PARAMS_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {0}: expected `key = value`")]
    Syntax(usize),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{0}` given twice")]
    Duplicate(String),
    #[error("missing key `{0}`")]
    Missing(&'static str),
    #[error("bad value for `{key}`: {value}")]
    BadValue { key: String, value: String },
    #[error("give exactly one of field_poly and field_prime")]
    FieldChoice,
    #[error("failed nodes must be two distinct ids in 1..={0}")]
    BadFailure(usize),
    #[error("groups must be at least 1")]
    NoGroups,
    #[error("parameter file: {0}")]
    ParamsFile(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Mscr(#[from] MscrError),
    #[error(transparent)]
    Scalar(#[from] ScalarCodeError),
    #[error(transparent)]
    Code(#[from] EmscrError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldChoice {
    Binary { poly: u64 },
    Prime { p: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub q: u64,
    /// Inner dimension.
    pub k: usize,
    pub outer_n: usize,
    pub outer_k: usize,
    pub field: FieldChoice,
    pub subgroup_order: u64,
    /// Sampled coordinate groups per block.
    pub groups: usize,
    pub seed: u64,
    pub fail: (usize, usize),
}

const KEYS: [&str; 10] = [
    "q",
    "k",
    "outer_n",
    "outer_k",
    "field_poly",
    "field_prime",
    "subgroup_order",
    "groups",
    "seed",
    "fail",
];

fn parse_u64(key: &str, value: &str) -> Result<u64, ConfigError> {
    let parsed = match value.strip_prefix("0x").or_else(|| value.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => value.parse(),
    };
    parsed.map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    })
}

/// Parses `i1,i2`.
pub fn parse_pair(key: &str, value: &str) -> Result<(usize, usize), ConfigError> {
    let bad = || ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    };
    let (a, b) = value.split_once(',').ok_or_else(bad)?;
    Ok((
        parse_u64(key, a.trim())? as usize,
        parse_u64(key, b.trim())? as usize,
    ))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut kv: BTreeMap<&str, &str> = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax(no + 1))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey(key.to_string()));
            }
            if kv.insert(key, value).is_some() {
                return Err(ConfigError::Duplicate(key.to_string()));
            }
        }
        let num = |key: &'static str| -> Result<u64, ConfigError> {
            parse_u64(key, kv.get(key).ok_or(ConfigError::Missing(key))?)
        };
        let opt = |key: &'static str, default: u64| -> Result<u64, ConfigError> {
            kv.get(key).map_or(Ok(default), |v| parse_u64(key, v))
        };
        let field = match (kv.get("field_poly"), kv.get("field_prime")) {
            (Some(v), None) => FieldChoice::Binary {
                poly: parse_u64("field_poly", v)?,
            },
            (None, Some(v)) => FieldChoice::Prime {
                p: parse_u64("field_prime", v)?,
            },
            _ => return Err(ConfigError::FieldChoice),
        };
        let fail = match kv.get("fail") {
            Some(v) => parse_pair("fail", v)?,
            None => (1, 2),
        };
        Ok(ExperimentConfig {
            q: num("q")?,
            k: num("k")? as usize,
            outer_n: num("outer_n")? as usize,
            outer_k: num("outer_k")? as usize,
            field,
            subgroup_order: num("subgroup_order")?,
            groups: opt("groups", 20)? as usize,
            seed: opt("seed", 0)?,
            fail,
        })
    }

    pub fn field_spec(&self) -> Result<FieldSpec, FieldError> {
        match self.field {
            FieldChoice::Binary { poly } => FieldSpec::binary(poly),
            FieldChoice::Prime { p } => FieldSpec::prime(p),
        }
    }

    /// Builds and validates the code, including the failure pair.
    pub fn build(&self) -> Result<EmscrParams, ConfigError> {
        let field = self.field_spec()?;
        let subgroup = field.subgroup_of_order(self.subgroup_order)?;
        let inner = MscrParams::build(self.q as usize, self.k, field, subgroup)?;
        let outer = ScalarCodeSpec::build_rs(self.q, self.outer_n, self.outer_k)?;
        let params = EmscrParams::build(inner, outer)?;
        let (a, b) = self.fail;
        let m = params.nodes();
        if a == b || a == 0 || b == 0 || a > m || b > m {
            return Err(ConfigError::BadFailure(m));
        }
        if self.groups == 0 {
            return Err(ConfigError::NoGroups);
        }
        Ok(params)
    }
}

/// A validated config with its built code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamsFile {
    pub config: ExperimentConfig,
    pub params: EmscrParams,
}

fn put(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_be_bytes());
}

fn field_words(f: &FieldSpec) -> [u64; 3] {
    [f.order(), f.poly_mask(), u64::from(f.generator().0)]
}

impl ParamsFile {
    pub fn from_config(config: ExperimentConfig) -> Result<Self, ConfigError> {
        let params = config.build()?;
        Ok(ParamsFile { config, params })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let c = &self.config;
        let p = &self.params;
        let mut out = PARAMS_MAGIC.to_vec();
        put(&mut out, PARAMS_VERSION);
        for w in field_words(&p.inner.field) {
            put(&mut out, w);
        }
        put(&mut out, p.inner.subgroup.order);
        put(&mut out, p.inner.n as u64);
        put(&mut out, p.inner.k as u64);
        put(&mut out, p.outer.q);
        put(&mut out, p.outer.length as u64);
        put(&mut out, p.outer.dimension as u64);
        for w in field_words(&p.outer.field) {
            put(&mut out, w);
        }
        put(&mut out, p.outer.eval_points.len() as u64);
        for x in &p.outer.eval_points {
            put(&mut out, u64::from(x.0));
        }
        put(&mut out, c.seed);
        put(&mut out, c.fail.0 as u64);
        put(&mut out, c.fail.1 as u64);
        put(&mut out, c.groups as u64);
        for table in [p.sigma(), p.inner.lambdas()] {
            put(&mut out, table.len() as u64);
            for x in table {
                put(&mut out, u64::from(x.0));
            }
        }
        out
    }

    pub fn digest(&self) -> ParamsDigest {
        Sha256::digest(self.to_bytes()).into()
    }

    /// Parses, rebuilds the code, and checks every stored table against it.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ConfigError> {
        let bad = |what: &str| ConfigError::ParamsFile(what.to_string());
        let body = bytes.strip_prefix(PARAMS_MAGIC.as_slice()).ok_or_else(|| bad("bad magic"))?;
        if body.len() % 8 != 0 {
            return Err(bad("length is not a whole number of words"));
        }
        let words: Vec<u64> = body
            .chunks_exact(8)
            .map(|c| u64::from_be_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let mut it = words.into_iter();
        let mut next = || it.next().ok_or_else(|| bad("truncated"));
        if next()? != PARAMS_VERSION {
            return Err(bad("unsupported version"));
        }
        let inner_field = FieldSpec::from_parts(next()?, next()?, next()?)?;
        let subgroup_order = next()?;
        let n = next()?;
        let k = next()? as usize;
        let q = next()?;
        let outer_n = next()? as usize;
        let outer_k = next()? as usize;
        let outer_field = [next()?, next()?, next()?];
        let points: Vec<u64> = (0..next()?).map(|_| next()).collect::<Result<_, _>>()?;
        let seed = next()?;
        let fail = (next()? as usize, next()? as usize);
        let groups = next()? as usize;
        let sigma: Vec<u64> = (0..next()?).map(|_| next()).collect::<Result<_, _>>()?;
        let lambda: Vec<u64> = (0..next()?).map(|_| next()).collect::<Result<_, _>>()?;
        if next().is_ok() {
            return Err(bad("trailing words"));
        }
        if n != q {
            return Err(bad("inner length differs from outer q"));
        }
        let field = match inner_field.poly_mask() {
            0 => FieldChoice::Prime { p: inner_field.order() },
            poly => FieldChoice::Binary { poly },
        };
        let config = ExperimentConfig {
            q,
            k,
            outer_n,
            outer_k,
            field,
            subgroup_order,
            groups,
            seed,
            fail,
        };
        let file = ParamsFile::from_config(config)?;
        let p = &file.params;
        let words = |t: &[Fe]| t.iter().map(|x| u64::from(x.0)).collect::<Vec<_>>();
        if field_words(&p.outer.field) != outer_field {
            return Err(bad("outer field mismatch"));
        }
        if words(&p.outer.eval_points) != points {
            return Err(bad("evaluation points mismatch"));
        }
        if words(p.sigma()) != sigma {
            return Err(bad("sigma table mismatch"));
        }
        if words(p.inner.lambdas()) != lambda {
            return Err(bad("lambda table mismatch"));
        }
        Ok(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ACCEPTANCE: &str = "\
# acceptance parameter set
q = 7
k = 2
outer_n = 7
outer_k = 2
field_poly = 0x1009
subgroup_order = 63
groups = 20
seed = 1
fail = 1, 2
";

    #[test]
    fn parses_and_builds() {
        let c = ExperimentConfig::parse(ACCEPTANCE).unwrap();
        assert_eq!(c.field, FieldChoice::Binary { poly: 0x1009 });
        assert_eq!(c.fail, (1, 2));
        let p = c.build().unwrap();
        assert_eq!(p.nodes(), 49);
        assert_eq!(p.r(), 5);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(matches!(ExperimentConfig::parse("q 7"), Err(ConfigError::Syntax(1))));
        assert!(matches!(ExperimentConfig::parse("colour = 3"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(ExperimentConfig::parse("q = 7\nq = 7"), Err(ConfigError::Duplicate(_))));
        let both = format!("{ACCEPTANCE}field_prime = 4099\n");
        assert!(matches!(ExperimentConfig::parse(&both), Err(ConfigError::FieldChoice)));
        let missing = ACCEPTANCE.replace("\nk = 2\n", "\n");
        assert!(matches!(ExperimentConfig::parse(&missing), Err(ConfigError::Missing("k"))));
        let same = ACCEPTANCE.replace("fail = 1, 2", "fail = 3,3");
        assert!(matches!(
            ExperimentConfig::parse(&same).unwrap().build(),
            Err(ConfigError::BadFailure(49))
        ));
        let r4 = ACCEPTANCE.replace("\nk = 2", "\nk = 3");
        assert!(matches!(
            ExperimentConfig::parse(&r4).unwrap().build(),
            Err(ConfigError::Code(EmscrError::TooFewParities(4)))
        ));
    }

    #[test]
    fn params_file_roundtrip_and_tamper() {
        let file = ParamsFile::from_config(ExperimentConfig::parse(ACCEPTANCE).unwrap()).unwrap();
        let bytes = file.to_bytes();
        let back = ParamsFile::from_bytes(&bytes).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.digest(), file.digest());

        // last word is the final lambda entry
        let mut tampered = bytes.clone();
        *tampered.last_mut().unwrap() ^= 1;
        assert!(matches!(ParamsFile::from_bytes(&tampered), Err(ConfigError::ParamsFile(_))));
        assert!(ParamsFile::from_bytes(&bytes[..bytes.len() - 8]).is_err());
        assert!(ParamsFile::from_bytes(b"nope").is_err());

        let reseeded = ExperimentConfig {
            seed: 2,
            ..file.config.clone()
        };
        assert_ne!(ParamsFile::from_config(reseeded).unwrap().digest(), file.digest());
    }
}
