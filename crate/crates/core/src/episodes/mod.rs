//! Episode generation: exemplar libraries and every sequence family used for
//! training and evaluation.
//!
//! All builders are pure functions of (library, config, rng state): identical
//! seeds give bit-identical episodes. Draw order within each builder is fixed
//! and documented on the method.

mod library;
mod zipf;

pub use library::ExemplarLibrary;
pub use zipf::{sample_class, ZipfSampler};

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::{Error, Result};

/// Context pairs per episode.
pub const CONTEXT_LEN: usize = 8;
/// Token sequence length: 8 exemplar/label pairs plus the query exemplar.
pub const SEQ_LEN: usize = 2 * CONTEXT_LEN + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum SequenceFamily {
    TrainBursty,
    TrainNonBursty,
    IclEval,
    IwlEval,
    FlippedIclEval,
    IwlCopyAvailableEval,
    IclOnlyTrain,
    IwlOnlyTrain,
}

impl SequenceFamily {
    pub fn is_training(self) -> bool {
        matches!(
            self,
            SequenceFamily::TrainBursty
                | SequenceFamily::TrainNonBursty
                | SequenceFamily::IclOnlyTrain
                | SequenceFamily::IwlOnlyTrain
        )
    }
}

/// One input sequence: 8 (exemplar, label) context pairs, a query exemplar,
/// and the label the model is scored against.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub context: Vec<(Vec<f32>, u32)>,
    pub query: Vec<f32>,
    pub target_label: u32,
    pub family: SequenceFamily,
    /// When present, accuracy scoring restricts the argmax to these labels.
    pub restricted_label_set: Option<Vec<u32>>,
    /// Flipped-ICL episodes also record the label the query class carried
    /// during training, so the evaluator can report the IWL-answer rate.
    pub unflipped_label: Option<u32>,
}

/// Settings for the training-sequence sampler.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SamplerConfig {
    /// Context pairs drawn from the query class in a bursty sequence.
    pub bursty_count: usize,
    /// Context pairs drawn from the distractor class in a bursty sequence.
    pub distractor_count: usize,
    /// Fraction of training sequences that are bursty.
    pub p_bursty: f64,
    /// Zipf exponent for the class distribution (0 = uniform).
    pub zipf_alpha: f64,
    /// Draw exemplars without replacement within a class when enough exist.
    pub sample_without_replacement: bool,
    /// Redraw ICL-eval queries until the exact exemplar is absent from
    /// context (off by default; queries are drawn independently).
    pub strict_query_exclusion: bool,
    /// Seed for standalone use of the sampler.
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            bursty_count: 3,
            distractor_count: 3,
            p_bursty: 1.0,
            zipf_alpha: 0.0,
            sample_without_replacement: true,
            strict_query_exclusion: false,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bursty_count == 0 {
            return Err(Error::Config("bursty_count must be at least 1".into()));
        }
        if self.bursty_count + self.distractor_count > CONTEXT_LEN {
            return Err(Error::Config(format!(
                "bursty_count + distractor_count must be at most {CONTEXT_LEN}"
            )));
        }
        if !(0.0..=1.0).contains(&self.p_bursty) {
            return Err(Error::Config("p_bursty must lie in [0, 1]".into()));
        }
        if !(self.zipf_alpha >= 0.0) {
            return Err(Error::Config("zipf_alpha must be non-negative".into()));
        }
        Ok(())
    }
}

/// Episode builders over one library. Holds the class-distribution table so
/// per-episode work stays O(context length).
pub struct EpisodeSampler<'a> {
    lib: &'a ExemplarLibrary,
    cfg: SamplerConfig,
    zipf: ZipfSampler,
}

impl<'a> EpisodeSampler<'a> {
    pub fn new(lib: &'a ExemplarLibrary, cfg: SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        let zipf = ZipfSampler::new(cfg.zipf_alpha, lib.num_classes())?;
        Ok(Self { lib, cfg, zipf })
    }

    pub fn library(&self) -> &ExemplarLibrary {
        self.lib
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    fn pair(&self, class: usize, index: usize) -> (Vec<f32>, u32) {
        (self.lib.exemplar(class, index).to_vec(), self.lib.label_of(class))
    }

    /// Exemplar indices within one class: without replacement when the class
    /// holds enough exemplars (and the config asks for it), else uniform.
    fn draw_exemplar_indices<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<usize> {
        let e = self.lib.exemplars_per_class();
        if self.cfg.sample_without_replacement && e >= count {
            rand::seq::index::sample(rng, e, count).into_vec()
        } else {
            (0..count).map(|_| rng.gen_range(0..e)).collect()
        }
    }

    fn draw_zipf_class_excluding<R: Rng + ?Sized>(&self, used: &[usize], rng: &mut R) -> usize {
        loop {
            let c = self.zipf.sample(rng);
            if !used.contains(&c) {
                return c;
            }
        }
    }

    fn draw_uniform_class_excluding<R: Rng + ?Sized>(&self, used: &[usize], rng: &mut R) -> usize {
        let k = self.lib.num_classes();
        loop {
            let c = rng.gen_range(0..k);
            if !used.contains(&c) {
                return c;
            }
        }
    }

    /// Training sequence. Draw order: query class, burstiness coin, context
    /// classes, context exemplar indices, query exemplar index, shuffle.
    ///
    /// Bursty: the context class-count multiset is exactly {bursty_count from
    /// the query class, distractor_count from a distractor, 1 each from the
    /// remaining distinct classes}, uniformly shuffled. Non-bursty: 8 pairs
    /// from 8 distinct classes, none of them the query class.
    pub fn train_episode<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Episode> {
        let k = self.lib.num_classes();
        let query_class = self.zipf.sample(rng);
        let bursty = rng.gen::<f64>() < self.cfg.p_bursty;
        let mut context: Vec<(Vec<f32>, u32)>;
        if bursty {
            let b = self.cfg.bursty_count;
            let dc = self.cfg.distractor_count;
            let singles = CONTEXT_LEN - b - dc;
            let needed = 1 + usize::from(dc > 0) + singles;
            if k < needed {
                return Err(Error::InvalidArg(format!(
                    "bursty sequences need at least {needed} classes, library has {k}"
                )));
            }
            let mut used = vec![query_class];
            let mut plan: Vec<(usize, usize)> = vec![(query_class, b)];
            if dc > 0 {
                let distractor = self.draw_zipf_class_excluding(&used, rng);
                used.push(distractor);
                plan.push((distractor, dc));
            }
            for _ in 0..singles {
                let c = self.draw_zipf_class_excluding(&used, rng);
                used.push(c);
                plan.push((c, 1));
            }
            context = Vec::with_capacity(CONTEXT_LEN);
            for (class, count) in plan {
                for idx in self.draw_exemplar_indices(count, rng) {
                    context.push(self.pair(class, idx));
                }
            }
        } else {
            if k < CONTEXT_LEN + 1 {
                return Err(Error::InvalidArg(format!(
                    "non-bursty sequences need at least {} classes, library has {k}",
                    CONTEXT_LEN + 1
                )));
            }
            let mut used = vec![query_class];
            context = Vec::with_capacity(CONTEXT_LEN);
            for _ in 0..CONTEXT_LEN {
                let c = self.draw_zipf_class_excluding(&used, rng);
                used.push(c);
                let idx = self.draw_exemplar_indices(1, rng)[0];
                context.push(self.pair(c, idx));
            }
        }
        let query_idx = rng.gen_range(0..self.lib.exemplars_per_class());
        context.shuffle(rng);
        Ok(Episode {
            context,
            query: self.lib.exemplar(query_class, query_idx).to_vec(),
            target_label: self.lib.label_of(query_class),
            family: if bursty { SequenceFamily::TrainBursty } else { SequenceFamily::TrainNonBursty },
            restricted_label_set: None,
            unflipped_label: None,
        })
    }

    /// ICL evaluation sequence: 4 exemplars from each of two classes, labels
    /// remapped to 0/1 at random per episode; accuracy restricted to {0, 1}.
    pub fn icl_eval_episode<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Episode> {
        self.two_class_episode(rng, TwoClassLabels::ZeroOne, SequenceFamily::IclEval)
    }

    /// Flipped-ICL sequence: the two classes appear with each other's
    /// training label. Answering the flipped label evidences ICL; the
    /// unflipped label is recorded so the IWL-answer rate can be reported.
    pub fn flipped_icl_episode<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Episode> {
        self.two_class_episode(rng, TwoClassLabels::Swapped, SequenceFamily::FlippedIclEval)
    }

    /// Shared layout of the two-class evaluators. Draw order: class pair,
    /// label assignment coin (ICL-eval only), exemplar indices for each
    /// class, query-side coin, query exemplar index, shuffle.
    fn two_class_episode<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        labels: TwoClassLabels,
        family: SequenceFamily,
    ) -> Result<Episode> {
        let k = self.lib.num_classes();
        if k < 2 {
            return Err(Error::InvalidArg(format!(
                "two-class evaluators need at least 2 classes, library has {k}"
            )));
        }
        let class_a = rng.gen_range(0..k);
        let class_b = self.draw_uniform_class_excluding(&[class_a], rng);
        let (label_a, label_b, unflipped) = match labels {
            TwoClassLabels::ZeroOne => {
                let bit = u32::from(rng.gen::<bool>());
                (bit, 1 - bit, None)
            }
            TwoClassLabels::Swapped => (
                self.lib.label_of(class_b),
                self.lib.label_of(class_a),
                Some((self.lib.label_of(class_a), self.lib.label_of(class_b))),
            ),
        };
        let per_class = CONTEXT_LEN / 2;
        let idx_a = self.draw_exemplar_indices(per_class, rng);
        let idx_b = self.draw_exemplar_indices(per_class, rng);
        let mut context = Vec::with_capacity(CONTEXT_LEN);
        for &i in &idx_a {
            context.push((self.lib.exemplar(class_a, i).to_vec(), label_a));
        }
        for &i in &idx_b {
            context.push((self.lib.exemplar(class_b, i).to_vec(), label_b));
        }
        let query_from_a = rng.gen::<bool>();
        let (query_class, query_ctx_idx) = if query_from_a { (class_a, &idx_a) } else { (class_b, &idx_b) };
        let query_idx = self.draw_query_index(query_ctx_idx, rng)?;
        context.shuffle(rng);
        let mut restricted = vec![label_a, label_b];
        restricted.sort_unstable();
        Ok(Episode {
            context,
            query: self.lib.exemplar(query_class, query_idx).to_vec(),
            target_label: if query_from_a { label_a } else { label_b },
            family,
            restricted_label_set: Some(restricted),
            unflipped_label: unflipped.map(|(ua, ub)| if query_from_a { ua } else { ub }),
        })
    }

    fn draw_query_index<R: Rng + ?Sized>(&self, in_context: &[usize], rng: &mut R) -> Result<usize> {
        let e = self.lib.exemplars_per_class();
        if !self.cfg.strict_query_exclusion {
            return Ok(rng.gen_range(0..e));
        }
        if in_context.len() >= e {
            return Err(Error::InvalidArg(
                "strict query exclusion needs more exemplars per class than appear in context".into(),
            ));
        }
        loop {
            let i = rng.gen_range(0..e);
            if !in_context.contains(&i) {
                return Ok(i);
            }
        }
    }

    /// IWL evaluation sequence: 8 pairs from 8 distinct non-query classes
    /// with their training labels; full-vocabulary scoring. The query class
    /// follows rank weights r^{-query_alpha} (0 = uniform).
    ///
    /// Draw order: query class, context classes (uniform), context exemplar
    /// indices, query exemplar index, shuffle.
    pub fn iwl_eval_episode<R: Rng + ?Sized>(&self, rng: &mut R, query_alpha: f64) -> Result<Episode> {
        let k = self.lib.num_classes();
        if k < CONTEXT_LEN + 1 {
            return Err(Error::InvalidArg(format!(
                "IWL evaluation needs at least {} classes, library has {k}",
                CONTEXT_LEN + 1
            )));
        }
        let query_class = if query_alpha == 0.0 {
            rng.gen_range(0..k)
        } else {
            ZipfSampler::new(query_alpha, k)?.sample(rng)
        };
        let mut used = vec![query_class];
        let mut context = Vec::with_capacity(CONTEXT_LEN);
        for _ in 0..CONTEXT_LEN {
            let c = self.draw_uniform_class_excluding(&used, rng);
            used.push(c);
            let idx = self.draw_exemplar_indices(1, rng)[0];
            context.push(self.pair(c, idx));
        }
        let query_idx = rng.gen_range(0..self.lib.exemplars_per_class());
        context.shuffle(rng);
        Ok(Episode {
            context,
            query: self.lib.exemplar(query_class, query_idx).to_vec(),
            target_label: self.lib.label_of(query_class),
            family: SequenceFamily::IwlEval,
            restricted_label_set: None,
            unflipped_label: None,
        })
    }

    /// IWL-eval with one uniformly chosen context label overwritten by the
    /// true answer; the exemplar in that slot keeps its non-query class.
    pub fn iwl_copy_available_episode<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Episode> {
        let mut ep = self.iwl_eval_episode(rng, 0.0)?;
        let slot = rng.gen_range(0..CONTEXT_LEN);
        ep.context[slot].1 = ep.target_label;
        ep.family = SequenceFamily::IwlCopyAvailableEval;
        Ok(ep)
    }

    /// Training sequences the network can only solve with ICL: the ICL-eval
    /// layout tagged as a training family.
    pub fn icl_only_train_episode<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Episode> {
        let mut ep = self.icl_eval_episode(rng)?;
        ep.family = SequenceFamily::IclOnlyTrain;
        Ok(ep)
    }

    /// Training sequences the network can only solve with IWL: the IWL-eval
    /// layout (query class under the sampler's Zipf exponent) tagged as a
    /// training family.
    pub fn iwl_only_train_episode<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Episode> {
        let mut ep = self.iwl_eval_episode(rng, self.cfg.zipf_alpha)?;
        ep.family = SequenceFamily::IwlOnlyTrain;
        Ok(ep)
    }
}

enum TwoClassLabels {
    ZeroOne,
    Swapped,
}

/// Number of distinct bursty training sequences under the default 3+3+1+1
/// layout: K·(K−1)·((K−2)(K−3)/2)·(8!/(3!·3!))·E⁹, returned exactly and as a
/// float.
pub fn count_train_sequences(num_classes: usize, exemplars_per_class: usize) -> Result<(BigUint, f64)> {
    if num_classes < 4 {
        return Err(Error::InvalidArg("sequence count needs at least 4 classes".into()));
    }
    if exemplars_per_class == 0 {
        return Err(Error::InvalidArg("sequence count needs at least 1 exemplar per class".into()));
    }
    let k = num_classes as u64;
    let orderings = factorial(8) / (factorial(3) * factorial(3));
    let exact = BigUint::from(k)
        * BigUint::from(k - 1)
        * (BigUint::from(k - 2) * BigUint::from(k - 3) / BigUint::from(2u32))
        * BigUint::from(orderings)
        * BigUint::from(exemplars_per_class as u64).pow(9);
    let approx = exact.to_f64().unwrap_or(f64::INFINITY);
    Ok((exact, approx))
}

fn factorial(n: u64) -> BigUint {
    (1..=n).map(BigUint::from).product::<BigUint>().max(BigUint::from(1u32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use std::collections::HashMap;

    fn small_lib() -> ExemplarLibrary {
        ExemplarLibrary::gaussian(16, 5, 4, 1.0, 0.1, 9).unwrap()
    }

    fn class_of(lib: &ExemplarLibrary, v: &[f32]) -> usize {
        // Exact vector lookup; library vectors are distinct with prob 1.
        for c in 0..lib.num_classes() {
            for e in 0..lib.exemplars_per_class() {
                if lib.exemplar(c, e).as_slice().unwrap() == v {
                    return c;
                }
            }
        }
        panic!("vector not found in library");
    }

    #[test]
    fn builders_are_deterministic() {
        let lib = small_lib();
        let s = EpisodeSampler::new(&lib, SamplerConfig::default()).unwrap();
        let mut a = stream(5, "train");
        let mut b = stream(5, "train");
        for _ in 0..50 {
            assert_eq!(s.train_episode(&mut a).unwrap(), s.train_episode(&mut b).unwrap());
        }
        let mut a = stream(5, "eval");
        let mut b = stream(5, "eval");
        assert_eq!(s.icl_eval_episode(&mut a).unwrap(), s.icl_eval_episode(&mut b).unwrap());
        assert_eq!(s.iwl_eval_episode(&mut a, 0.0).unwrap(), s.iwl_eval_episode(&mut b, 0.0).unwrap());
        assert_eq!(s.flipped_icl_episode(&mut a).unwrap(), s.flipped_icl_episode(&mut b).unwrap());
        assert_eq!(
            s.iwl_copy_available_episode(&mut a).unwrap(),
            s.iwl_copy_available_episode(&mut b).unwrap()
        );
    }

    #[test]
    fn bursty_episode_has_3311_multiset() {
        let lib = small_lib();
        let s = EpisodeSampler::new(&lib, SamplerConfig::default()).unwrap();
        let mut rng = stream(1, "train");
        for _ in 0..10_000 {
            let ep = s.train_episode(&mut rng).unwrap();
            assert_eq!(ep.family, SequenceFamily::TrainBursty);
            let mut counts: HashMap<usize, usize> = HashMap::new();
            for (v, l) in &ep.context {
                let c = class_of(&lib, v);
                assert_eq!(*l, lib.label_of(c));
                *counts.entry(c).or_default() += 1;
            }
            let qc = class_of(&lib, &ep.query);
            assert_eq!(ep.target_label, lib.label_of(qc));
            assert_eq!(counts.get(&qc), Some(&3), "query class must appear 3 times");
            let mut multiset: Vec<usize> = counts.values().copied().collect();
            multiset.sort_unstable();
            assert_eq!(multiset, vec![1, 1, 3, 3]);
            assert_eq!(counts.len(), 4);
        }
    }

    #[test]
    fn non_bursty_episode_excludes_query_class() {
        let lib = small_lib();
        let cfg = SamplerConfig { p_bursty: 0.0, ..SamplerConfig::default() };
        let s = EpisodeSampler::new(&lib, cfg).unwrap();
        let mut rng = stream(2, "train");
        for _ in 0..2_000 {
            let ep = s.train_episode(&mut rng).unwrap();
            assert_eq!(ep.family, SequenceFamily::TrainNonBursty);
            let qc = class_of(&lib, &ep.query);
            let classes: Vec<usize> = ep.context.iter().map(|(v, _)| class_of(&lib, v)).collect();
            assert!(!classes.contains(&qc));
            let mut uniq = classes.clone();
            uniq.sort_unstable();
            uniq.dedup();
            assert_eq!(uniq.len(), CONTEXT_LEN);
        }
    }

    #[test]
    fn bursty_needs_four_classes_and_non_bursty_nine() {
        let lib3 = ExemplarLibrary::gaussian(3, 2, 4, 1.0, 0.1, 1).unwrap();
        let s = EpisodeSampler::new(&lib3, SamplerConfig::default()).unwrap();
        assert!(s.train_episode(&mut stream(0, "t")).is_err());

        let lib8 = ExemplarLibrary::gaussian(8, 2, 4, 1.0, 0.1, 1).unwrap();
        let cfg = SamplerConfig { p_bursty: 0.0, ..SamplerConfig::default() };
        let s = EpisodeSampler::new(&lib8, cfg).unwrap();
        assert!(s.train_episode(&mut stream(0, "t")).is_err());
        assert!(s.iwl_eval_episode(&mut stream(0, "t"), 0.0).is_err());
    }

    #[test]
    fn query_class_follows_zipf_per_decile() {
        let lib = ExemplarLibrary::gaussian(100, 1, 2, 1.0, 0.1, 4).unwrap();
        let cfg = SamplerConfig { zipf_alpha: 1.0, ..SamplerConfig::default() };
        let s = EpisodeSampler::new(&lib, cfg).unwrap();
        let zipf = ZipfSampler::new(1.0, 100).unwrap();
        let n = 100_000;
        let mut counts = vec![0u64; 100];
        let mut rng = stream(3, "train");
        for _ in 0..n {
            let ep = s.train_episode(&mut rng).unwrap();
            counts[class_of(&lib, &ep.query)] += 1;
        }
        for decile in 0..10 {
            let classes = decile * 10..(decile + 1) * 10;
            let p: f64 = classes.clone().map(|c| zipf.prob(c)).sum();
            let observed: u64 = classes.map(|c| counts[c]).sum();
            let freq = observed as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!(
                (freq - p).abs() <= 3.0 * se,
                "decile {decile}: freq {freq} expected {p} (3se {})",
                3.0 * se
            );
        }
    }

    #[test]
    fn icl_eval_structure() {
        let lib = small_lib();
        let s = EpisodeSampler::new(&lib, SamplerConfig::default()).unwrap();
        let mut rng = stream(7, "eval");
        let mut first_class_got_zero = 0u32;
        let n = 10_000;
        for _ in 0..n {
            let ep = s.icl_eval_episode(&mut rng).unwrap();
            assert_eq!(ep.restricted_label_set, Some(vec![0, 1]));
            let qc = class_of(&lib, &ep.query);
            let matching: Vec<&(Vec<f32>, u32)> =
                ep.context.iter().filter(|(v, _)| class_of(&lib, v) == qc).collect();
            assert_eq!(matching.len(), 4, "exactly 4 context pairs share the query class");
            assert!(matching.iter().all(|(_, l)| *l == ep.target_label));
            let mut classes: Vec<usize> = ep.context.iter().map(|(v, _)| class_of(&lib, v)).collect();
            classes.sort_unstable();
            classes.dedup();
            assert_eq!(classes.len(), 2);
            // Track the random 0/1 assignment via the lower class index.
            let lower = *classes.first().unwrap();
            let lower_label = ep.context.iter().find(|(v, _)| class_of(&lib, v) == lower).unwrap().1;
            if lower_label == 0 {
                first_class_got_zero += 1;
            }
        }
        let frac = f64::from(first_class_got_zero) / f64::from(n);
        assert!((frac - 0.5).abs() < 0.03, "label assignment fraction {frac}");
    }

    #[test]
    fn iwl_eval_structure() {
        let lib = small_lib();
        let s = EpisodeSampler::new(&lib, SamplerConfig::default()).unwrap();
        let mut rng = stream(8, "eval");
        for _ in 0..2_000 {
            let ep = s.iwl_eval_episode(&mut rng, 0.0).unwrap();
            assert!(ep.restricted_label_set.is_none());
            let qc = class_of(&lib, &ep.query);
            for (v, l) in &ep.context {
                let c = class_of(&lib, v);
                assert_ne!(c, qc);
                assert_eq!(*l, lib.label_of(c));
            }
            assert_eq!(ep.target_label, lib.label_of(qc));
        }
    }

    #[test]
    fn flipped_icl_swaps_training_labels() {
        let lib = small_lib();
        let s = EpisodeSampler::new(&lib, SamplerConfig::default()).unwrap();
        let mut rng = stream(9, "eval");
        for _ in 0..2_000 {
            let ep = s.flipped_icl_episode(&mut rng).unwrap();
            let qc = class_of(&lib, &ep.query);
            let unflipped = ep.unflipped_label.expect("flipped episodes record the unflipped label");
            assert_eq!(unflipped, lib.label_of(qc));
            assert_ne!(ep.target_label, unflipped);
            // Query-class context pairs carry the flipped label (the target).
            for (v, l) in &ep.context {
                let c = class_of(&lib, v);
                if c == qc {
                    assert_eq!(*l, ep.target_label);
                } else {
                    assert_eq!(*l, unflipped);
                }
            }
            let set = ep.restricted_label_set.as_ref().unwrap();
            assert!(set.contains(&ep.target_label) && set.contains(&unflipped));
        }
    }

    #[test]
    fn copy_available_overwrites_exactly_one_label() {
        let lib = small_lib();
        let s = EpisodeSampler::new(&lib, SamplerConfig::default()).unwrap();
        let mut rng = stream(10, "eval");
        for _ in 0..2_000 {
            let ep = s.iwl_copy_available_episode(&mut rng).unwrap();
            let qc = class_of(&lib, &ep.query);
            let hits: Vec<&(Vec<f32>, u32)> =
                ep.context.iter().filter(|(_, l)| *l == ep.target_label).collect();
            assert_eq!(hits.len(), 1, "exactly one context label equals the target");
            assert_ne!(class_of(&lib, &hits[0].0), qc);
        }
    }

    #[test]
    fn pure_copy_baseline_matches_closed_form() {
        // A predictor that outputs a uniformly random context label scores
        // 1/8 + (7/8)·(collision rate), where the collision rate is the
        // chance a non-overwritten slot also carries the target label.
        let lib = small_lib();
        let s = EpisodeSampler::new(&lib, SamplerConfig::default()).unwrap();
        let mut rng = stream(11, "eval");
        let mut pick = stream(12, "pick");
        let n = 20_000;
        let mut correct = 0u64;
        let mut collisions = 0u64;
        for _ in 0..n {
            let ep = s.iwl_copy_available_episode(&mut rng).unwrap();
            let slot = pick.gen_range(0..CONTEXT_LEN);
            if ep.context[slot].1 == ep.target_label {
                correct += 1;
            }
            collisions += ep
                .context
                .iter()
                .filter(|(_, l)| *l == ep.target_label)
                .count() as u64
                - 1;
        }
        let collision_rate = collisions as f64 / (n as f64 * (CONTEXT_LEN - 1) as f64);
        let expected = 1.0 / 8.0 + (7.0 / 8.0) * collision_rate;
        let observed = correct as f64 / n as f64;
        assert!((observed - expected).abs() < 0.01, "observed {observed}, expected {expected}");
    }

    #[test]
    fn only_train_families_reuse_eval_builders() {
        let lib = small_lib();
        let s = EpisodeSampler::new(&lib, SamplerConfig::default()).unwrap();
        let mut a = stream(13, "x");
        let mut b = stream(13, "x");
        let icl = s.icl_only_train_episode(&mut a).unwrap();
        let mut icl_eval = s.icl_eval_episode(&mut b).unwrap();
        icl_eval.family = SequenceFamily::IclOnlyTrain;
        assert_eq!(icl, icl_eval);
        assert!(icl.family.is_training());

        let iwl = s.iwl_only_train_episode(&mut a).unwrap();
        let mut iwl_eval = s.iwl_eval_episode(&mut b, 0.0).unwrap();
        iwl_eval.family = SequenceFamily::IwlOnlyTrain;
        assert_eq!(iwl, iwl_eval);
    }

    #[test]
    fn shuffle_is_uniform_over_slots() {
        // Marginal occupancy: each slot holds a query-class pair with
        // probability 3/8. First-occurrence position: P(min = j) =
        // C(7−j, 2)/C(8, 3). Both checked within 3 standard errors.
        let lib = small_lib();
        let s = EpisodeSampler::new(&lib, SamplerConfig::default()).unwrap();
        let mut rng = stream(14, "train");
        let n = 100_000u64;
        let mut occupancy = [0u64; CONTEXT_LEN];
        let mut first_pos = [0u64; CONTEXT_LEN];
        for _ in 0..n {
            let ep = s.train_episode(&mut rng).unwrap();
            let qc = class_of(&lib, &ep.query);
            let mut seen = false;
            for (j, (v, _)) in ep.context.iter().enumerate() {
                if class_of(&lib, v) == qc {
                    occupancy[j] += 1;
                    if !seen {
                        first_pos[j] += 1;
                        seen = true;
                    }
                }
            }
        }
        let choose = |n: u64, k: u64| -> f64 {
            let mut v = 1.0;
            for i in 0..k {
                v *= (n - i) as f64 / (i + 1) as f64;
            }
            v
        };
        for j in 0..CONTEXT_LEN {
            let p_occ = 3.0 / 8.0;
            let se_occ = (p_occ * (1.0 - p_occ) / n as f64).sqrt();
            let f_occ = occupancy[j] as f64 / n as f64;
            assert!((f_occ - p_occ).abs() <= 3.0 * se_occ, "slot {j} occupancy {f_occ}");

            let p_first = if j <= 5 { choose(7 - j as u64, 2) / choose(8, 3) } else { 0.0 };
            let f_first = first_pos[j] as f64 / n as f64;
            let se_first = (p_first * (1.0 - p_first) / n as f64).sqrt();
            assert!(
                (f_first - p_first).abs() <= 3.0 * se_first + 1e-12,
                "slot {j} first-position {f_first} expected {p_first}"
            );
        }
    }

    #[test]
    fn sequence_count_matches_reported_figure() {
        let (exact, approx) = count_train_sequences(1600, 20).unwrap();
        assert!((approx - 1.87e27).abs() / 1.87e27 < 0.01, "approx {approx:e}");
        assert_eq!(exact.to_string().len(), 28);

        let (exact, approx) = count_train_sequences(4, 1).unwrap();
        assert_eq!(exact, BigUint::from(13_440u64));
        assert_eq!(approx, 13_440.0);

        let orderings = factorial(8) / (factorial(3) * factorial(3));
        assert_eq!(orderings, BigUint::from(1120u32));

        assert!(count_train_sequences(3, 20).is_err());
        assert!(count_train_sequences(1600, 0).is_err());
    }

    #[test]
    fn strict_query_exclusion_keeps_query_out_of_context() {
        let lib = small_lib();
        let cfg = SamplerConfig { strict_query_exclusion: true, ..SamplerConfig::default() };
        let s = EpisodeSampler::new(&lib, cfg).unwrap();
        let mut rng = stream(15, "eval");
        for _ in 0..2_000 {
            let ep = s.icl_eval_episode(&mut rng).unwrap();
            assert!(!ep.context.iter().any(|(v, _)| v == &ep.query));
        }
    }
}
