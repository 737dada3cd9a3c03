//! Content-addressed result cache.
//!
//! Results are keyed by the full parameter tuple (dimension, level, Weyl
//! element, moduli, denominator bound, engine version); the file name is the
//! SHA-256 of the canonical key string, so identical queries hit identical
//! files and stale engines never alias. Payloads are line-delimited text:
//! a `count` line and optionally one line per representative pair with the
//! entries as exact fractions `num/den`.

use crate::bruhat::ModulusVector;
use crate::exact::{Rational, RationalMatrix};
use crate::ksets::CosetPair;
use crate::weyl::WeylElement;
use num_bigint::BigInt;
use sha2::{Digest, Sha256};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

/// Bumped whenever enumeration semantics change; part of every cache key.
pub const ENGINE_VERSION: &str = "1";

#[derive(Debug, Clone)]
pub struct ResultCache {
    dir: PathBuf,
}

/// Canonical cache key for a Kloosterman-set query.
pub fn set_key(n: usize, scope: &str, w: &WeylElement, c: &ModulusVector, denom_bound: u64) -> String {
    format!(
        "klab/set/v{ENGINE_VERSION}/n={n}/scope={scope}/w={:?}/c={:?}/D={denom_bound}",
        w.perm(),
        c.entries()
    )
}

/// Canonical cache key for a Kloosterman-sum query.
#[allow(clippy::too_many_arguments)]
pub fn sum_key(
    n: usize,
    q: u64,
    w: &WeylElement,
    m_char: &[i64],
    n_char: &[i64],
    v: &[i8],
    c: &ModulusVector,
    denom_bound: u64,
) -> String {
    format!(
        "klab/sum/v{ENGINE_VERSION}/n={n}/q={q}/w={:?}/M={m_char:?}/N={n_char:?}/v={v:?}/c={:?}/D={denom_bound}",
        w.perm(),
        c.entries()
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct CachedSet {
    pub count: u64,
    pub pairs: Option<Vec<(Vec<Rational>, Vec<Rational>)>>,
}

impl ResultCache {
    pub fn open(dir: impl AsRef<Path>) -> io::Result<Self> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(ResultCache {
            dir: dir.as_ref().to_path_buf(),
        })
    }

    fn path_for(&self, key: &str) -> PathBuf {
        let mut h = Sha256::new();
        h.update(key.as_bytes());
        self.dir.join(format!("{:x}.klab", h.finalize()))
    }

    pub fn lookup_set(&self, key: &str) -> Option<CachedSet> {
        let text = fs::read_to_string(self.path_for(key)).ok()?;
        let mut lines = text.lines();
        if lines.next()? != format!("key {key}") {
            return None;
        }
        let count: u64 = lines.next()?.strip_prefix("count ")?.parse().ok()?;
        let mut pairs = Vec::new();
        let mut saw_pairs = false;
        for line in lines {
            if line.is_empty() {
                continue;
            }
            saw_pairs = true;
            let (xs, ys) = line.split_once(" | ")?;
            let parse_side = |s: &str| -> Option<Vec<Rational>> {
                s.split_whitespace()
                    .map(|f| {
                        let (a, b) = f.split_once('/')?;
                        Some(Rational::new(BigInt::from_str(a).ok()?, BigInt::from_str(b).ok()?))
                    })
                    .collect()
            };
            pairs.push((parse_side(xs)?, parse_side(ys)?));
        }
        Some(CachedSet {
            count,
            pairs: saw_pairs.then_some(pairs),
        })
    }

    pub fn store_set(&self, key: &str, count: u64, pairs: Option<&[CosetPair]>) -> io::Result<()> {
        let mut out = String::new();
        out.push_str(&format!("key {key}\n"));
        out.push_str(&format!("count {count}\n"));
        if let Some(pairs) = pairs {
            for pair in pairs {
                let side = |m: &RationalMatrix| -> String {
                    let n = m.n();
                    let mut fields = Vec::new();
                    for i in 0..n {
                        for j in i + 1..n {
                            let e = m.get(i, j);
                            fields.push(format!("{}/{}", e.numer(), e.denom()));
                        }
                    }
                    fields.join(" ")
                };
                out.push_str(&format!("{} | {}\n", side(&pair.x), side(&pair.y)));
            }
        }
        let path = self.path_for(key);
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(out.as_bytes())?;
        }
        fs::rename(tmp, path)
    }

    /// Cached sum records are stored as single JSON lines.
    pub fn lookup_text(&self, key: &str) -> Option<String> {
        let text = fs::read_to_string(self.path_for(key)).ok()?;
        let mut lines = text.lines();
        if lines.next()? != format!("key {key}") {
            return None;
        }
        Some(lines.collect::<Vec<_>>().join("\n"))
    }

    pub fn store_text(&self, key: &str, body: &str) -> io::Result<()> {
        let path = self.path_for(key);
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            writeln!(f, "key {key}")?;
            f.write_all(body.as_bytes())?;
        }
        fs::rename(tmp, path)
    }
}

static GLOBAL: OnceLock<Mutex<Option<ResultCache>>> = OnceLock::new();

/// Install a process-wide cache; sum evaluations consult it so cache hits
/// short-circuit enumeration.
pub fn set_global_cache(cache: Option<ResultCache>) {
    *GLOBAL.get_or_init(|| Mutex::new(None)).lock().unwrap() = cache;
}

pub fn global_cache() -> Option<ResultCache> {
    GLOBAL.get_or_init(|| Mutex::new(None)).lock().unwrap().clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ksets::{enumerate_global, EnumOptions, LatticeSpec};

    #[test]
    fn set_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResultCache::open(dir.path()).unwrap();
        let spec = LatticeSpec::new(2, 1);
        let w = WeylElement::long_element(2);
        let c = ModulusVector::new(vec![5]).unwrap();
        let en = enumerate_global(&spec, &w, &c, &EnumOptions::default()).unwrap();
        let key = set_key(2, "q=1", &w, &c, 5);
        cache.store_set(&key, en.pairs.len() as u64, Some(&en.pairs)).unwrap();
        let hit = cache.lookup_set(&key).unwrap();
        assert_eq!(hit.count, 4);
        let pairs = hit.pairs.unwrap();
        assert_eq!(pairs.len(), 4);
        // stored fractions reproduce the representatives exactly
        for (stored, pair) in pairs.iter().zip(&en.pairs) {
            assert_eq!(stored.0[0], *pair.x.get(0, 1));
            assert_eq!(stored.1[0], *pair.y.get(0, 1));
        }
        // distinct keys address distinct files
        let other = set_key(2, "q=1", &w, &c, 10);
        assert!(cache.lookup_set(&other).is_none());
    }

    #[test]
    fn text_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResultCache::open(dir.path()).unwrap();
        cache.store_text("some/key", "{\"a\":1}").unwrap();
        assert_eq!(cache.lookup_text("some/key").unwrap(), "{\"a\":1}");
        assert!(cache.lookup_text("other/key").is_none());
    }
}
