//! Joint vision-language embedding providers.
//!
//! The synthetic provider is a linear grounded encoder whose style (wall
//! color) subspace is exactly orthogonal to its semantic content, so text
//! deltas equal image-space style deltas by construction. A file-backed
//! provider serves embeddings computed offline by a real encoder.

use crate::world::{feature_width, ObjectCategory, RayObservation, WallColor};
use ndarray::{Array1, Array2};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

pub type Embedding = Array1<f64>;

pub const DEFAULT_DIM: usize = 64;
pub const PROMPT_TEMPLATE: &str = "a photo of a {label}";

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("unknown text label: {0:?}")]
    UnknownLabel(String),
    #[error("dimension mismatch: provider d={expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("embedding dimension {0} too small: need at least 13")]
    DimTooSmall(usize),
    #[error("observation key {0} not present in external embedding file")]
    MissingObservation(String),
    #[error("malformed embedding file: {0}")]
    Malformed(String),
    #[error("invalid prompt template {0:?}")]
    BadTemplate(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// A text prompt in the fixed template.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextPrompt {
    pub template: String,
    pub label: String,
}

impl TextPrompt {
    pub fn new(label: impl Into<String>) -> TextPrompt {
        TextPrompt { template: PROMPT_TEMPLATE.to_string(), label: label.into() }
    }

    pub fn render(&self) -> String {
        self.template.replace("{label}", &self.label)
    }

    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.template != PROMPT_TEMPLATE {
            return Err(EmbedError::BadTemplate(self.template.clone()));
        }
        Ok(())
    }
}

pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;
    /// Encode an observation. The rng is only drawn from when the provider
    /// adds noise.
    fn embed_observation(
        &self,
        obs: &RayObservation,
        rng: &mut dyn RngCore,
    ) -> Result<Embedding, EmbedError>;
    fn embed_text(&self, prompt: &TextPrompt) -> Result<Embedding, EmbedError>;
}

// ---------------------------------------------------------------------------
// Synthetic grounded encoder
// ---------------------------------------------------------------------------

/// Linear synthetic encoder: `I = A f(obs) + B c(obs) + sigma eta`, with the
/// style basis B orthonormal and orthogonal to the column spaces of the
/// semantic basis A and the goal basis G.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticProvider {
    pub d: usize,
    pub k_rays: usize,
    pub seed: u64,
    pub noise_sigma: f64,
    /// d x m semantic basis (m = raw feature width).
    a: Array2<f64>,
    /// d x 3 style basis, orthonormal columns.
    b: Array2<f64>,
    /// d x 9 goal basis, orthonormal columns.
    g: Array2<f64>,
    /// fixed offset added to wall prompts; cancels in prompt differences.
    b0: Array1<f64>,
}

impl SyntheticProvider {
    pub fn new(d: usize, k_rays: usize, seed: u64, noise_sigma: f64) -> Result<Self, EmbedError> {
        if d < 13 {
            return Err(EmbedError::DimTooSmall(d));
        }
        let m = feature_width(k_rays);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Orthonormal d x d basis by Gram-Schmidt on Gaussian draws.
        let mut basis: Vec<Array1<f64>> = Vec::with_capacity(d);
        while basis.len() < d {
            let mut v: Array1<f64> =
                Array1::from_iter((0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
            for u in &basis {
                let proj = v.dot(u);
                v = v - proj * u;
            }
            let norm = v.dot(&v).sqrt();
            if norm > 1e-8 {
                basis.push(v / norm);
            }
        }
        let col = |i: usize| basis[i].view();
        let mut b = Array2::zeros((d, 3));
        for i in 0..3 {
            b.column_mut(i).assign(&col(i));
        }
        let mut g = Array2::zeros((d, 9));
        for i in 0..9 {
            g.column_mut(i).assign(&col(3 + i));
        }
        // A = U R with U the remaining orthonormal columns, so col(A) is
        // orthogonal to col(B) and col(G).
        let n_sem = d - 12;
        let mut u = Array2::zeros((d, n_sem));
        for i in 0..n_sem {
            u.column_mut(i).assign(&col(12 + i));
        }
        let scale = 1.0 / (m as f64).sqrt();
        let r = Array2::from_shape_fn((n_sem, m), |_| {
            rng.sample::<f64, _>(StandardNormal) * scale
        });
        let a = u.dot(&r);
        // offset inside the semantic span, away from the style subspace
        let b0_coef = Array1::from_iter((0..n_sem).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let b0 = u.dot(&b0_coef);
        Ok(SyntheticProvider { d, k_rays, seed, noise_sigma, a, b, g, b0 })
    }

    pub fn style_basis(&self) -> &Array2<f64> {
        &self.b
    }

    pub fn semantic_basis(&self) -> &Array2<f64> {
        &self.a
    }

    /// Project an embedding onto the style subspace coordinates (B^T x).
    pub fn style_coords(&self, x: &Embedding) -> Array1<f64> {
        self.b.t().dot(x)
    }
}

impl EmbeddingProvider for SyntheticProvider {
    fn dim(&self) -> usize {
        self.d
    }

    fn embed_observation(
        &self,
        obs: &RayObservation,
        rng: &mut dyn RngCore,
    ) -> Result<Embedding, EmbedError> {
        if obs.rays.len() != self.k_rays {
            return Err(EmbedError::DimMismatch {
                expected: feature_width(self.k_rays),
                got: feature_width(obs.rays.len()),
            });
        }
        let f = Array1::from(obs.features(true));
        let c = Array1::from(obs.color_mass().to_vec());
        let mut out = self.a.dot(&f) + self.b.dot(&c);
        if self.noise_sigma > 0.0 {
            use rand_distr::Distribution;
            for v in out.iter_mut() {
                let eta: f64 = StandardNormal.sample(rng);
                *v += self.noise_sigma * eta;
            }
        }
        Ok(out)
    }

    fn embed_text(&self, prompt: &TextPrompt) -> Result<Embedding, EmbedError> {
        prompt.validate()?;
        if let Some(color) = WallColor::ALL.iter().find(|c| c.label() == prompt.label) {
            let mut e = Array1::zeros(3);
            e[color.index()] = 1.0;
            return Ok(self.b.dot(&e) + &self.b0);
        }
        if let Some(cat) = ObjectCategory::from_label(&prompt.label) {
            let mut e = Array1::zeros(9);
            e[cat.index()] = 1.0;
            return Ok(self.g.dot(&e));
        }
        Err(EmbedError::UnknownLabel(prompt.label.clone()))
    }
}

// ---------------------------------------------------------------------------
// External (file-backed) provider
// ---------------------------------------------------------------------------

/// Stable key for an observation: a digest of its exact feature values.
pub fn observation_key(obs: &RayObservation) -> String {
    let mut hasher = Sha256::new();
    for v in obs.features(false) {
        hasher.update(v.to_bits().to_le_bytes());
    }
    let digest = hasher.finalize();
    digest.iter().take(16).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingFile {
    pub version: u32,
    pub d: usize,
    pub text: BTreeMap<String, Vec<f64>>,
    pub obs: BTreeMap<String, Vec<f64>>,
}

pub const EMBEDDING_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct ExternalProvider {
    d: usize,
    text: BTreeMap<String, Embedding>,
    obs: BTreeMap<String, Embedding>,
}

/// Load a provider from the documented JSON embedding file.
pub fn load_external_provider(path: &Path) -> Result<ExternalProvider, EmbedError> {
    let raw = std::fs::read_to_string(path)?;
    let file: EmbeddingFile = serde_json::from_str(&raw)?;
    if file.version != EMBEDDING_FILE_VERSION {
        return Err(EmbedError::Malformed(format!("unsupported version {}", file.version)));
    }
    let check = |label: &str, v: &[f64]| -> Result<(), EmbedError> {
        if v.len() != file.d {
            return Err(EmbedError::Malformed(format!(
                "entry {label:?} has length {}, expected {}",
                v.len(),
                file.d
            )));
        }
        Ok(())
    };
    let mut text = BTreeMap::new();
    for (k, v) in &file.text {
        check(k, v)?;
        text.insert(k.clone(), Array1::from(v.clone()));
    }
    let mut obs = BTreeMap::new();
    for (k, v) in &file.obs {
        check(k, v)?;
        obs.insert(k.clone(), Array1::from(v.clone()));
    }
    Ok(ExternalProvider { d: file.d, text, obs })
}

impl EmbeddingProvider for ExternalProvider {
    fn dim(&self) -> usize {
        self.d
    }

    fn embed_observation(
        &self,
        obs: &RayObservation,
        _rng: &mut dyn RngCore,
    ) -> Result<Embedding, EmbedError> {
        let key = observation_key(obs);
        self.obs
            .get(&key)
            .cloned()
            .ok_or(EmbedError::MissingObservation(key))
    }

    fn embed_text(&self, prompt: &TextPrompt) -> Result<Embedding, EmbedError> {
        prompt.validate()?;
        self.text
            .get(&prompt.label)
            .cloned()
            .ok_or_else(|| EmbedError::UnknownLabel(prompt.label.clone()))
    }
}

/// Export a provider's outputs for a set of prompts and observations into the
/// external embedding file format.
pub fn export_provider_file(
    provider: &dyn EmbeddingProvider,
    prompts: &[TextPrompt],
    observations: &[RayObservation],
    path: &Path,
) -> Result<(), EmbedError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut text = BTreeMap::new();
    for p in prompts {
        text.insert(p.label.clone(), provider.embed_text(p)?.to_vec());
    }
    let mut obs = BTreeMap::new();
    for o in observations {
        obs.insert(observation_key(o), provider.embed_observation(o, &mut rng)?.to_vec());
    }
    let file = EmbeddingFile { version: EMBEDDING_FILE_VERSION, d: provider.dim(), text, obs };
    std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{HitClass, RayRecord};
    use ndarray::s;

    fn obs_with(hits: Vec<HitClass>, dist: f64) -> RayObservation {
        RayObservation {
            rays: hits.into_iter().map(|h| RayRecord { distance: dist, hit: h }).collect(),
            pitch: 0,
        }
    }

    fn provider() -> SyntheticProvider {
        SyntheticProvider::new(64, 15, 9, 0.0).unwrap()
    }

    #[test]
    fn zero_wall_hits_embedding_in_semantic_span() {
        let p = provider();
        let obs = obs_with(vec![HitClass::Door; 15], 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let emb = p.embed_observation(&obs, &mut rng).unwrap();
        let style = p.style_coords(&emb);
        assert!(style.iter().all(|v| v.abs() < 1e-9), "style component should be zero");
    }

    #[test]
    fn recolor_difference_lies_in_style_span() {
        let p = provider();
        let red = obs_with(vec![HitClass::Wall(WallColor::Red); 15], 1.5);
        let green = obs_with(vec![HitClass::Wall(WallColor::Green); 15], 1.5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = p.embed_observation(&red, &mut rng).unwrap()
            - p.embed_observation(&green, &mut rng).unwrap();
        // the difference reconstructs exactly from its style coordinates
        let recon = p.style_basis().dot(&p.style_coords(&d));
        let err = (&d - &recon).iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "difference should lie in the style span, err={err}");
    }

    #[test]
    fn style_coords_reconstruct_color_mass() {
        let p = provider();
        let mut hits = vec![HitClass::Wall(WallColor::Blue); 7];
        hits.extend(vec![HitClass::Door; 4]);
        hits.extend(vec![HitClass::Wall(WallColor::Red); 4]);
        let obs = obs_with(hits, 0.75);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let emb = p.embed_observation(&obs, &mut rng).unwrap();
        let recovered = p.style_coords(&emb);
        let expected = obs.color_mass();
        for i in 0..3 {
            assert!((recovered[i] - expected[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn wall_prompt_differences_cancel_offset() {
        let p = provider();
        let red = p.embed_text(&TextPrompt::new("red wall")).unwrap();
        let green = p.embed_text(&TextPrompt::new("green wall")).unwrap();
        let diff = &red - &green;
        // expected: B (e_red - e_green)
        let mut e = Array1::zeros(3);
        e[0] = 1.0;
        e[1] = -1.0;
        let expected = p.style_basis().dot(&e);
        let err = (&diff - &expected).iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn text_embedding_deterministic() {
        let p = provider();
        let a = p.embed_text(&TextPrompt::new("blue wall")).unwrap();
        let b = p.embed_text(&TextPrompt::new("blue wall")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wall_prompt_differences_span_two_dims() {
        let p = provider();
        let embs: Vec<Embedding> = WallColor::ALL
            .iter()
            .map(|c| p.embed_text(&TextPrompt::new(c.label())).unwrap())
            .collect();
        // rank of all pairwise differences via Gram-Schmidt
        let mut basis: Vec<Array1<f64>> = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue;
                }
                let mut v = &embs[i] - &embs[j];
                for u in &basis {
                    let proj = v.dot(u);
                    v = v - proj * u;
                }
                let n = v.dot(&v).sqrt();
                if n > 1e-9 {
                    basis.push(v / n);
                }
            }
        }
        assert_eq!(basis.len(), 2);
    }

    #[test]
    fn unknown_label_rejected() {
        let p = provider();
        assert!(matches!(
            p.embed_text(&TextPrompt::new("purple wall")),
            Err(EmbedError::UnknownLabel(_))
        ));
    }

    #[test]
    fn semantic_style_orthogonality() {
        let p = provider();
        let prod = p.semantic_basis().t().dot(p.style_basis());
        let max = prod.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(max < 1e-9, "A^T B should vanish, max={max}");
        // B columns orthonormal
        let btb = p.style_basis().t().dot(p.style_basis());
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((btb[[i, j]] - want).abs() < 1e-9);
            }
        }
        let _ = btb.slice(s![.., ..]);
    }

    #[test]
    fn external_provider_round_trip() {
        let p = provider();
        let obs = obs_with(vec![HitClass::Wall(WallColor::Red); 15], 1.0);
        let prompts: Vec<TextPrompt> =
            WallColor::ALL.iter().map(|c| TextPrompt::new(c.label())).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.json");
        export_provider_file(&p, &prompts, std::slice::from_ref(&obs), &path).unwrap();
        let ext = load_external_provider(&path).unwrap();
        assert_eq!(ext.dim(), 64);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            ext.embed_observation(&obs, &mut rng).unwrap(),
            p.embed_observation(&obs, &mut rng).unwrap()
        );
        assert_eq!(
            ext.embed_text(&TextPrompt::new("red wall")).unwrap(),
            p.embed_text(&TextPrompt::new("red wall")).unwrap()
        );
    }

    #[test]
    fn external_provider_missing_label_errors_on_use() {
        let p = provider();
        let prompts = [TextPrompt::new("red wall"), TextPrompt::new("green wall")];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.json");
        export_provider_file(&p, &prompts, &[], &path).unwrap();
        let ext = load_external_provider(&path).unwrap();
        assert!(ext.embed_text(&TextPrompt::new("red wall")).is_ok());
        assert!(matches!(
            ext.embed_text(&TextPrompt::new("blue wall")),
            Err(EmbedError::UnknownLabel(_))
        ));
        let obs = obs_with(vec![HitClass::Door; 15], 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            ext.embed_observation(&obs, &mut rng),
            Err(EmbedError::MissingObservation(_))
        ));
    }
}
