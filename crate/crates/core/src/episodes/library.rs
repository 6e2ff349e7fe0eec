//! Exemplar libraries: the fixed class → exemplar-vectors and class → label
//! mappings that define both the training distribution and the in-weights
//! ground truth.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1};

use crate::rng::{standard_normal, stream};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"ICL1";

/// K classes of E exemplars each, all fixed D_x-dimensional vectors, plus a
/// bijective class → label map. Vectors are stored class-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ExemplarLibrary {
    num_classes: usize,
    exemplars_per_class: usize,
    exemplar_dim: usize,
    vectors: Array2<f32>,
    label_of: Vec<u32>,
}

impl ExemplarLibrary {
    pub fn new(
        num_classes: usize,
        exemplars_per_class: usize,
        vectors: Array2<f32>,
        label_of: Vec<u32>,
    ) -> Result<Self> {
        if num_classes == 0 || exemplars_per_class == 0 {
            return Err(Error::InvalidArg(
                "library needs at least one class and one exemplar per class".into(),
            ));
        }
        if vectors.nrows() != num_classes * exemplars_per_class {
            return Err(Error::InvalidArg(format!(
                "expected {} exemplar rows, got {}",
                num_classes * exemplars_per_class,
                vectors.nrows()
            )));
        }
        if vectors.ncols() == 0 {
            return Err(Error::InvalidArg("exemplar dimension must be positive".into()));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArg("library vectors must be finite".into()));
        }
        if label_of.len() != num_classes {
            return Err(Error::InvalidArg("label map length must equal class count".into()));
        }
        let mut seen = vec![false; num_classes];
        for &l in &label_of {
            let l = l as usize;
            if l >= num_classes || seen[l] {
                return Err(Error::InvalidArg("label map must be a bijection over [0, K)".into()));
            }
            seen[l] = true;
        }
        let exemplar_dim = vectors.ncols();
        Ok(Self { num_classes, exemplars_per_class, exemplar_dim, vectors, label_of })
    }

    /// Synthetic library: class centroids with scale `class_spread`, exemplars
    /// as centroid plus noise with scale `within_spread`. Labels are the
    /// identity map. Deterministic given the seed.
    pub fn gaussian(
        num_classes: usize,
        exemplars_per_class: usize,
        exemplar_dim: usize,
        class_spread: f64,
        within_spread: f64,
        seed: u64,
    ) -> Result<Self> {
        if num_classes == 0 || exemplars_per_class == 0 || exemplar_dim == 0 {
            return Err(Error::InvalidArg("library dimensions must be positive".into()));
        }
        if !(class_spread > 0.0) || !(within_spread > 0.0) {
            return Err(Error::InvalidArg("spreads must be positive".into()));
        }
        let mut rng = stream(seed, "library");
        let mut vectors = Array2::<f32>::zeros((num_classes * exemplars_per_class, exemplar_dim));
        let mut centroid = vec![0.0f64; exemplar_dim];
        for class in 0..num_classes {
            for c in centroid.iter_mut() {
                *c = class_spread * standard_normal(&mut rng);
            }
            for ex in 0..exemplars_per_class {
                let mut row = vectors.row_mut(class * exemplars_per_class + ex);
                for (j, x) in row.iter_mut().enumerate() {
                    *x = (centroid[j] + within_spread * standard_normal(&mut rng)) as f32;
                }
            }
        }
        let label_of = (0..num_classes as u32).collect();
        Self::new(num_classes, exemplars_per_class, vectors, label_of)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn exemplars_per_class(&self) -> usize {
        self.exemplars_per_class
    }

    pub fn exemplar_dim(&self) -> usize {
        self.exemplar_dim
    }

    pub fn exemplar(&self, class: usize, index: usize) -> ArrayView1<'_, f32> {
        debug_assert!(class < self.num_classes && index < self.exemplars_per_class);
        self.vectors.row(class * self.exemplars_per_class + index)
    }

    pub fn label_of(&self, class: usize) -> u32 {
        self.label_of[class]
    }

    pub fn labels(&self) -> &[u32] {
        &self.label_of
    }

    pub fn vectors(&self) -> &Array2<f32> {
        &self.vectors
    }

    /// Mean within-class and mean between-class pairwise Euclidean distance,
    /// estimated over at most `max_classes` classes so it stays cheap on
    /// large libraries.
    pub fn separability(&self, max_classes: usize) -> (f64, f64) {
        let k = self.num_classes.min(max_classes.max(2));
        let e = self.exemplars_per_class;
        let dist = |a: ArrayView1<f32>, b: ArrayView1<f32>| -> f64 {
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| {
                    let d = f64::from(x - y);
                    d * d
                })
                .sum::<f64>()
                .sqrt()
        };
        let (mut within, mut nw) = (0.0, 0u64);
        let (mut between, mut nb) = (0.0, 0u64);
        for ca in 0..k {
            for i in 0..e {
                let a = self.exemplar(ca, i);
                for j in (i + 1)..e {
                    within += dist(a, self.exemplar(ca, j));
                    nw += 1;
                }
                for cb in (ca + 1)..k {
                    for j in 0..e {
                        between += dist(a, self.exemplar(cb, j));
                        nb += 1;
                    }
                }
            }
        }
        (
            if nw == 0 { 0.0 } else { within / nw as f64 },
            if nb == 0 { 0.0 } else { between / nb as f64 },
        )
    }

    /// Write the `.icllib` format: magic "ICL1", little-endian u32 K, E, D_x,
    /// K·E·D_x little-endian f32 values in class-major, exemplar-major,
    /// dimension-minor order, then K little-endian u32 labels.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.num_classes as u32).to_le_bytes())?;
        w.write_all(&(self.exemplars_per_class as u32).to_le_bytes())?;
        w.write_all(&(self.exemplar_dim as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.vectors.len() * 4);
        for v in self.vectors.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        buf.clear();
        for l in &self.label_of {
            buf.extend_from_slice(&l.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not an .icllib file (bad magic)".into()));
        }
        let k = read_u32(r)? as usize;
        let e = read_u32(r)? as usize;
        let d = read_u32(r)? as usize;
        if k == 0 || e == 0 || d == 0 {
            return Err(Error::Format("library header has zero dimension".into()));
        }
        let n = k
            .checked_mul(e)
            .and_then(|x| x.checked_mul(d))
            .ok_or_else(|| Error::Format("library dimensions overflow".into()))?;
        let mut data = vec![0u8; n * 4];
        r.read_exact(&mut data)?;
        let floats: Vec<f32> = data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let vectors = Array2::from_shape_vec((k * e, d), floats)
            .map_err(|e| Error::Format(e.to_string()))?;
        let mut labels = Vec::with_capacity(k);
        for _ in 0..k {
            labels.push(read_u32(r)?);
        }
        Self::new(k, e, vectors, labels).map_err(|err| match err {
            Error::InvalidArg(m) => Error::Format(m),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut f)
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
