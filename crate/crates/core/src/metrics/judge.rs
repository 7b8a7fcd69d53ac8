//! Equivalence judges consulted for disputed labels and predicates.

use std::collections::hash_map::DefaultHasher;
use std::collections::{HashMap, HashSet};
use std::hash::{Hash, Hasher};
use std::sync::Mutex;

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum JudgeError {
    #[error("judge transport failed: {0}")]
    Transport(String),
    #[error("judge returned an unusable verdict: {0}")]
    BadVerdict(String),
}

/// Decides whether two differing names mean the same thing in a scene.
///
/// Implementations must be deterministic for fixed inputs and reflexive.
pub trait JudgeClient: Send + Sync {
    fn judge_objects(
        &self,
        label_a: &str,
        label_b: &str,
        scene_context: &str,
    ) -> Result<bool, JudgeError>;

    fn judge_predicates(
        &self,
        pred_a: &str,
        pred_b: &str,
        subject: &str,
        object: &str,
        scene_context: &str,
    ) -> Result<bool, JudgeError>;
}

impl<J: JudgeClient + ?Sized> JudgeClient for &J {
    fn judge_objects(&self, a: &str, b: &str, ctx: &str) -> Result<bool, JudgeError> {
        (**self).judge_objects(a, b, ctx)
    }

    fn judge_predicates(
        &self,
        a: &str,
        b: &str,
        s: &str,
        o: &str,
        ctx: &str,
    ) -> Result<bool, JudgeError> {
        (**self).judge_predicates(a, b, s, o, ctx)
    }
}

impl<J: JudgeClient + ?Sized> JudgeClient for Box<J> {
    fn judge_objects(&self, a: &str, b: &str, ctx: &str) -> Result<bool, JudgeError> {
        (**self).judge_objects(a, b, ctx)
    }

    fn judge_predicates(
        &self,
        a: &str,
        b: &str,
        s: &str,
        o: &str,
        ctx: &str,
    ) -> Result<bool, JudgeError> {
        (**self).judge_predicates(a, b, s, o, ctx)
    }
}

/// Rejects every disputed pair; soft evaluation then equals strict.
#[derive(Debug, Clone, Copy, Default)]
pub struct RejectingJudge;

impl JudgeClient for RejectingJudge {
    fn judge_objects(&self, a: &str, b: &str, _: &str) -> Result<bool, JudgeError> {
        Ok(a == b)
    }

    fn judge_predicates(
        &self,
        a: &str,
        b: &str,
        _: &str,
        _: &str,
        _: &str,
    ) -> Result<bool, JudgeError> {
        Ok(a == b)
    }
}

/// File form of [`SynonymJudge`]:
///
/// ```json
/// {"objects": [["person", "man", "woman"]], "predicates": [["on", "parked-on"]]}
/// ```
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynonymTable {
    #[serde(default)]
    pub objects: Vec<Vec<String>>,
    #[serde(default)]
    pub predicates: Vec<Vec<String>>,
}

/// Deterministic stub: two names are equivalent when they are equal or share
/// a synonym group (case-insensitive). Context is ignored.
#[derive(Debug, Clone, Default)]
pub struct SynonymJudge {
    objects: HashMap<String, Vec<usize>>,
    predicates: HashMap<String, Vec<usize>>,
}

fn index_groups(groups: &[Vec<String>]) -> HashMap<String, Vec<usize>> {
    let mut map: HashMap<String, Vec<usize>> = HashMap::new();
    for (g, names) in groups.iter().enumerate() {
        for n in names {
            map.entry(n.trim().to_lowercase()).or_default().push(g);
        }
    }
    map
}

fn share_group(map: &HashMap<String, Vec<usize>>, a: &str, b: &str) -> bool {
    let (a, b) = (a.trim().to_lowercase(), b.trim().to_lowercase());
    if a == b {
        return true;
    }
    match (map.get(&a), map.get(&b)) {
        (Some(ga), Some(gb)) => {
            let ga: HashSet<_> = ga.iter().collect();
            gb.iter().any(|g| ga.contains(g))
        }
        _ => false,
    }
}

impl SynonymJudge {
    pub fn new(table: &SynonymTable) -> Self {
        Self {
            objects: index_groups(&table.objects),
            predicates: index_groups(&table.predicates),
        }
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        Ok(Self::new(&serde_json::from_str(text)?))
    }
}

impl JudgeClient for SynonymJudge {
    fn judge_objects(&self, a: &str, b: &str, _: &str) -> Result<bool, JudgeError> {
        Ok(share_group(&self.objects, a, b))
    }

    fn judge_predicates(
        &self,
        a: &str,
        b: &str,
        _: &str,
        _: &str,
        _: &str,
    ) -> Result<bool, JudgeError> {
        Ok(share_group(&self.predicates, a, b))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum CacheKey {
    Objects(String, String, u64),
    Predicates(String, String, String, String, u64),
}

fn context_hash(ctx: &str) -> u64 {
    let mut h = DefaultHasher::new();
    ctx.hash(&mut h);
    h.finish()
}

/// Memoizes verdicts per (pair, context hash) for the lifetime of the value.
/// Failures are not cached.
#[derive(Debug, Default)]
pub struct CachingJudge<J> {
    inner: J,
    cache: Mutex<HashMap<CacheKey, bool>>,
}

impl<J: JudgeClient> CachingJudge<J> {
    pub fn new(inner: J) -> Self {
        Self {
            inner,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.cache.lock().map(|c| c.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn memo(
        &self,
        key: CacheKey,
        call: impl FnOnce() -> Result<bool, JudgeError>,
    ) -> Result<bool, JudgeError> {
        if let Some(&v) = self
            .cache
            .lock()
            .ok()
            .and_then(|c| c.get(&key).copied())
            .as_ref()
        {
            return Ok(v);
        }
        let v = call()?;
        if let Ok(mut c) = self.cache.lock() {
            c.insert(key, v);
        }
        Ok(v)
    }
}

impl<J: JudgeClient> JudgeClient for CachingJudge<J> {
    fn judge_objects(&self, a: &str, b: &str, ctx: &str) -> Result<bool, JudgeError> {
        let key = CacheKey::Objects(a.into(), b.into(), context_hash(ctx));
        self.memo(key, || self.inner.judge_objects(a, b, ctx))
    }

    fn judge_predicates(
        &self,
        a: &str,
        b: &str,
        s: &str,
        o: &str,
        ctx: &str,
    ) -> Result<bool, JudgeError> {
        let key = CacheKey::Predicates(a.into(), b.into(), s.into(), o.into(), context_hash(ctx));
        self.memo(key, || self.inner.judge_predicates(a, b, s, o, ctx))
    }
}
