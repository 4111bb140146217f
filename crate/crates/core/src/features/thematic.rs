//! Keyphrase-to-topic distance binning, thematic profiles and topic coupling.

use serde::{Deserialize, Serialize};

use crate::adapters::PhraseEmbedder;
use crate::stats::mutual_information;
use crate::{Error, Result, Scalar};

pub const DISTANCE_BINS: usize = 6;
pub const DISTANCE_BIN_NAMES: [&str; DISTANCE_BINS] =
    ["core", "close", "related", "peripheral", "distant", "unrelated"];
/// Interior edges of [0,.1), [.1,.2), [.2,.4), [.4,.6), [.6,.8), [.8,1].
const DISTANCE_EDGES: [f64; DISTANCE_BINS - 1] = [0.1, 0.2, 0.4, 0.6, 0.8];

/// One row per topic, one column per distance bin.
pub type ThemeMatrix<T> = Vec<[T; DISTANCE_BINS]>;

/// A named topic with the keyphrases that define its centroid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSpec {
    pub name: String,
    pub keyphrases: Vec<String>,
}

/// The nine-topic taxonomy used by default.
pub fn default_taxonomy() -> Vec<TopicSpec> {
    let t = |name: &str, kp: &[&str]| TopicSpec {
        name: name.to_string(),
        keyphrases: kp.iter().map(|s| s.to_string()).collect(),
    };
    vec![
        t(
            "Gender Equality",
            &[
                "legalize same-sex marriage",
                "transgender",
                "women's rights",
                "female",
                "mayor",
                "LGBT",
                "gay",
                "pride parade",
            ],
        ),
        t(
            "Human Rights",
            &[
                "human rights",
                "civil liberties",
                "freedom of speech",
                "discrimination",
                "justice",
            ],
        ),
        t(
            "Violence",
            &[
                "sexual assault",
                "harassment",
                "abuse",
                "domestic violence",
                "trafficking",
            ],
        ),
        t(
            "Health & Reproductive Rights",
            &[
                "reproductive rights",
                "abortion",
                "maternal health",
                "healthcare",
                "contraception",
            ],
        ),
        t(
            "Political Change",
            &["election", "legislation", "policy reform", "parliament", "protest"],
        ),
        t(
            "Natural Disaster",
            &["earthquake", "flood", "hurricane", "wildfire", "disaster relief"],
        ),
        t(
            "Climate & Environment",
            &[
                "climate change",
                "emissions",
                "pollution",
                "renewable energy",
                "drought",
            ],
        ),
        t(
            "Migration & Displacement",
            &["refugees", "asylum", "immigration", "border", "displacement"],
        ),
        t(
            "Technology & AI",
            &[
                "artificial intelligence",
                "deepfake",
                "social media",
                "algorithm",
                "online safety",
            ],
        ),
    ]
}

/// Lower-case, punctuation-free identifier for a topic name.
pub fn topic_slug(name: &str) -> String {
    let mut out = String::new();
    for part in name.split(|c: char| !c.is_alphanumeric()).filter(|p| !p.is_empty()) {
        if !out.is_empty() {
            out.push('_');
        }
        out.push_str(&part.to_lowercase());
    }
    out
}

/// Mean embedding of each topic's keyphrases (not renormalized).
pub fn compute_topic_centroids(topics: &[TopicSpec], embedder: &dyn PhraseEmbedder) -> Result<Vec<Vec<f64>>> {
    topics
        .iter()
        .map(|topic| {
            if topic.keyphrases.is_empty() {
                return Err(Error::invalid(format!("topic `{}` has no keyphrases", topic.name)));
            }
            let vectors = topic
                .keyphrases
                .iter()
                .map(|k| embedder.embed(k).map(|e| e.vector))
                .collect::<Result<Vec<_>>>()?;
            centroid(&vectors).map_err(|e| match e {
                Error::Degenerate(_) => Error::Degenerate(format!("topic `{}` has a zero centroid", topic.name)),
                other => other,
            })
        })
        .collect()
}

/// Arithmetic mean of equally sized vectors; a zero mean is degenerate.
pub fn centroid<T: Scalar>(vectors: &[Vec<T>]) -> Result<Vec<T>> {
    let first = vectors.first().ok_or_else(|| Error::invalid("no vectors to average"))?;
    let dim = first.len();
    let mut acc = vec![T::zero(); dim];
    for v in vectors {
        if v.len() != dim {
            return Err(Error::invalid("embedding dimension mismatch"));
        }
        for (a, &x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    let n = T::from_count(vectors.len());
    acc.iter_mut().for_each(|a| *a /= n);
    let norm2: T = acc.iter().map(|&a| a * a).sum();
    if norm2.sqrt() <= T::epsilon() {
        return Err(Error::Degenerate("centroid is the zero vector".into()));
    }
    Ok(acc)
}

/// Cosine distance 1 − cos(v, c), in [0, 2].
pub fn keyphrase_topic_distance<T: Scalar>(v: &[T], c: &[T]) -> Result<T> {
    if v.len() != c.len() {
        return Err(Error::invalid("embedding dimension mismatch"));
    }
    let dot: T = v.iter().zip(c).map(|(&a, &b)| a * b).sum();
    let nv: T = v.iter().map(|&a| a * a).sum::<T>().sqrt();
    let nc: T = c.iter().map(|&a| a * a).sum::<T>().sqrt();
    if nv == T::zero() || nc == T::zero() {
        return Err(Error::invalid("distance to a zero vector is undefined"));
    }
    let cos = (dot / (nv * nc)).max(-T::one()).min(T::one());
    Ok(T::one() - cos)
}

/// 0-based distance bin; distances past 1.0 fall into the last bin.
pub fn distance_bin<T: Scalar>(d: T) -> usize {
    DISTANCE_EDGES.iter().filter(|&&e| d >= T::c(e)).count()
}

/// Share of a content item's keyphrases in each distance bin, per topic.
/// `None` when the item has no keyphrases.
pub fn content_thematic_profile<T: Scalar>(
    phrase_vectors: &[Vec<T>],
    centroids: &[Vec<T>],
) -> Result<Option<ThemeMatrix<T>>> {
    if phrase_vectors.is_empty() {
        return Ok(None);
    }
    let share = T::one() / T::from_count(phrase_vectors.len());
    let mut m = vec![[T::zero(); DISTANCE_BINS]; centroids.len()];
    for (row, c) in m.iter_mut().zip(centroids) {
        for v in phrase_vectors {
            row[distance_bin(keyphrase_topic_distance(v, c)?)] += share;
        }
    }
    Ok(Some(m))
}

/// Weighted mean of content profiles. `None` when the total weight is zero.
pub fn aggregate_thematic_distribution<T: Scalar>(profiles: &[(&ThemeMatrix<T>, T)]) -> Result<Option<ThemeMatrix<T>>> {
    let Some((first, _)) = profiles.first() else {
        return Ok(None);
    };
    let topics = first.len();
    let mut theta = vec![[T::zero(); DISTANCE_BINS]; topics];
    let mut total = T::zero();
    for &(m, w) in profiles {
        if !(w >= T::zero()) {
            return Err(Error::invalid(format!("negative weight {w}")));
        }
        if m.len() != topics {
            return Err(Error::invalid("profiles disagree on topic count"));
        }
        for (acc, row) in theta.iter_mut().zip(m.iter()) {
            for (a, &x) in acc.iter_mut().zip(row) {
                *a += w * x;
            }
        }
        total += w;
    }
    if !(total > T::zero()) {
        return Ok(None);
    }
    for row in theta.iter_mut() {
        row.iter_mut().for_each(|a| *a /= total);
    }
    Ok(Some(theta))
}

/// Lowest-index bin carrying the most mass in each topic row.
pub fn dominant_bins<T: Scalar>(m: &ThemeMatrix<T>) -> Vec<usize> {
    m.iter()
        .map(|row| {
            let mut best = 0;
            for (i, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

pub type JointTable<T> = Vec<Vec<T>>;

/// Weighted joint distribution of the dominant bins of topics `a` and `b`
/// over a day's content items. `items` are (dominant bins, weight).
pub fn dominant_bin_joint<T: Scalar>(items: &[(Vec<usize>, T)], a: usize, b: usize) -> Option<JointTable<T>> {
    let total: T = items.iter().map(|(_, w)| *w).sum();
    if !(total > T::zero()) {
        return None;
    }
    let mut joint = vec![vec![T::zero(); DISTANCE_BINS]; DISTANCE_BINS];
    for (bins, w) in items {
        joint[bins[a]][bins[b]] += *w / total;
    }
    Some(joint)
}

pub fn joint_marginals<T: Scalar>(joint: &JointTable<T>) -> (Vec<T>, Vec<T>) {
    let rows = joint.iter().map(|r| r.iter().copied().sum()).collect();
    let cols = (0..joint.first().map_or(0, Vec::len))
        .map(|z| joint.iter().map(|r| r[z]).sum())
        .collect();
    (rows, cols)
}

const MARGINAL_TOLERANCE: f64 = 1e-9;

/// MI between two topics' bin assignments given their joint and the two
/// marginal distributions. The joint must be a distribution whose marginals
/// agree with the given ones to 1e-9.
pub fn topic_mutual_information<T: Scalar>(joint: &JointTable<T>, theta_a: &[T], theta_b: &[T]) -> Result<T> {
    let tol = T::c(MARGINAL_TOLERANCE);
    if joint.iter().flatten().any(|&p| !(p >= T::zero())) {
        return Err(Error::invalid("joint has negative or NaN mass"));
    }
    let total: T = joint.iter().flatten().copied().sum();
    if (total - T::one()).abs() > tol {
        return Err(Error::invalid(format!("joint sums to {total}, not 1")));
    }
    let (rows, cols) = joint_marginals(joint);
    if rows.len() != theta_a.len() || cols.len() != theta_b.len() {
        return Err(Error::invalid("joint shape does not match marginals"));
    }
    let mismatch = rows
        .iter()
        .zip(theta_a)
        .chain(cols.iter().zip(theta_b))
        .any(|(&x, &y)| (x - y).abs() > tol);
    if mismatch {
        return Err(Error::invalid("joint marginals disagree with topic distributions"));
    }
    Ok(mutual_information(joint, theta_a, theta_b))
}

/// Topic-by-topic MI for one day, from the dominant-bin joint of every pair
/// and that joint's own marginals.
#[allow(clippy::needless_range_loop)] // fills both triangles
pub fn topic_mi_matrix<T: Scalar>(items: &[(Vec<usize>, T)], topics: usize) -> Option<Vec<Vec<T>>> {
    let mut mi = vec![vec![T::zero(); topics]; topics];
    for a in 0..topics {
        for b in a..topics {
            let joint = dominant_bin_joint(items, a, b)?;
            let (ra, cb) = joint_marginals(&joint);
            let v = mutual_information(&joint, &ra, &cb);
            mi[a][b] = v;
            mi[b][a] = v;
        }
    }
    Some(mi)
}
