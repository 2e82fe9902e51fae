//! Procedural multi-domain glyph benchmark.
//!
//! Seven glyph classes are painted with per-channel affine palettes. The
//! source domain paints each class with its own palette, so colour alone
//! predicts the label; the targets draw palettes at random from sets far from
//! the source's, so that shortcut breaks while shape stays informative.

mod domain;
mod glyph;
pub mod oracle;

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

pub use domain::{
    expected_channel_means, source_domain, stylize, target_domains, Correlation, DomainSpec, Palette,
    BACKGROUND, FOREGROUND, MIN_GAIN, PALETTE_GAP,
};
pub use glyph::{
    rasterize, render_content, render_glyph, Glyph, Jitter, CLASSES, GLYPH_RADIUS, IMAGE_SIZE, MAX_SHIFT,
    SCALE_RANGE,
};

use crate::style::StyleRng;
use crate::tensor::{read_tensor, write_tensor, DType, Tensor};
use crate::{Error, Result};

pub const TRAIN_SIZE: usize = 2048;
pub const TARGET_SIZE: usize = 1024;

/// Images (N×3×32×32 in [0, 1]), labels and domain ids of one split.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub name: String,
    pub domain: usize,
    pub images: Tensor,
    pub labels: Vec<usize>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Rows `index` gathered into a new image tensor.
    pub fn gather(&self, index: &[usize]) -> (Tensor, Vec<usize>) {
        let per = self.images.numel() / self.len().max(1);
        let mut data = Vec::with_capacity(index.len() * per);
        for &i in index {
            data.extend_from_slice(&self.images.data()[i * per..(i + 1) * per]);
        }
        let mut shape = self.images.shape().to_vec();
        shape[0] = index.len();
        let labels = index.iter().map(|&i| self.labels[i]).collect();
        (Tensor::new(shape, data).expect("gathered rows"), labels)
    }

    /// The first `n` samples.
    pub fn head(&self, n: usize) -> Split {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        let (images, labels) = self.gather(&idx);
        Split {
            name: self.name.clone(),
            domain: self.domain,
            images,
            labels,
        }
    }

    pub fn label_histogram(&self, classes: usize) -> Vec<usize> {
        let mut h = vec![0; classes];
        for &l in &self.labels {
            h[l] += 1;
        }
        h
    }
}

/// Draws `n` samples of `spec` with labels `i mod K`, then shuffles them.
pub fn generate_split(name: &str, spec: &DomainSpec, n: usize, rng: &mut StyleRng) -> Split {
    let mut labels: Vec<usize> = (0..n).map(|i| i % CLASSES).collect();
    labels.shuffle(rng);
    let mut data = Vec::with_capacity(n * 3 * IMAGE_SIZE * IMAGE_SIZE);
    for &k in &labels {
        let (mask, _) = render_content(k, rng);
        data.extend_from_slice(stylize(&mask, spec, k, rng).data());
    }
    Split {
        name: name.to_string(),
        domain: spec.id,
        images: Tensor::new(vec![n, 3, IMAGE_SIZE, IMAGE_SIZE], data).expect("n images"),
        labels,
    }
}

/// Source split plus three target splits, fully determined by `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub seed: u64,
    pub domains: Vec<DomainSpec>,
    pub train: Split,
    pub targets: Vec<Split>,
}

pub fn make_benchmark(seed: u64) -> Benchmark {
    make_benchmark_sized(seed, TRAIN_SIZE, TARGET_SIZE)
}

/// [`make_benchmark`] with custom split sizes. Each split has its own ChaCha
/// stream, so one split's content does not depend on another's size.
pub fn make_benchmark_sized(seed: u64, train: usize, target: usize) -> Benchmark {
    make_benchmark_from(seed, builtin_domains(), train, target).expect("builtin domains are valid")
}

/// Builtin domains: the source first, then the targets.
pub fn builtin_domains() -> Vec<DomainSpec> {
    std::iter::once(source_domain()).chain(target_domains()).collect()
}

/// Source split of `train` images from `domains[0]` and one split of
/// `target` images from each later domain. Split `i` draws from stream
/// `domains[i].id` of `seed`.
pub fn make_benchmark_from(seed: u64, domains: Vec<DomainSpec>, train: usize, target: usize) -> Result<Benchmark> {
    if domains.len() < 2 {
        return Err(Error::invalid("domains", "need a source and at least one target"));
    }
    if train == 0 || target == 0 {
        return Err(Error::invalid("domains", "split sizes must be positive"));
    }
    for (i, d) in domains.iter().enumerate() {
        d.validate()?;
        if domains[..i].iter().any(|e| e.id == d.id || e.name == d.name) {
            return Err(Error::invalid("domains", format!("duplicate id or name in {:?}", d.name)));
        }
        if d.name == "train" {
            return Err(Error::invalid("domains", "\"train\" is reserved for the source split"));
        }
    }
    let stream = |i: u64| {
        let mut rng = StyleRng::seed_from_u64(seed);
        rng.set_stream(i);
        rng
    };
    let train = generate_split("train", &domains[0], train, &mut stream(domains[0].id as u64));
    let targets = domains[1..]
        .iter()
        .map(|d| generate_split(&d.name, d, target, &mut stream(d.id as u64)))
        .collect();
    Ok(Benchmark {
        seed,
        domains,
        train,
        targets,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitEntry {
    name: String,
    domain: usize,
    size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    seed: u64,
    classes: usize,
    image_size: usize,
    splits: Vec<SplitEntry>,
    domains: Vec<DomainSpec>,
}

pub const MANIFEST_FILE: &str = "manifest.toml";

fn split_files(name: &str) -> [String; 3] {
    [
        format!("{name}.images.advt"),
        format!("{name}.labels.advt"),
        format!("{name}.domains.advt"),
    ]
}

fn write_file(path: &Path, t: &Tensor, dtype: DType) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_tensor(&mut w, t, dtype)?;
    std::io::Write::flush(&mut w)?;
    Ok(())
}

fn read_file(path: &Path) -> Result<Tensor> {
    let file = fs::File::open(path).map_err(|e| Error::invalid("dataset", format!("{}: {e}", path.display())))?;
    Ok(read_tensor(&mut BufReader::new(file))?)
}

impl Benchmark {
    pub fn splits(&self) -> impl Iterator<Item = &Split> {
        std::iter::once(&self.train).chain(&self.targets)
    }

    pub fn split(&self, name: &str) -> Option<&Split> {
        self.splits().find(|s| s.name == name)
    }

    /// Writes one ADVT file per split for images (f32), labels and domain
    /// ids, plus `manifest.toml`, into an existing directory.
    pub fn save(&self, dir: &Path) -> Result<()> {
        for s in self.splits() {
            let [img, lab, dom] = split_files(&s.name);
            write_file(&dir.join(img), &s.images, DType::F32)?;
            let labels = Tensor::from_vec(s.labels.iter().map(|&l| l as f64).collect());
            write_file(&dir.join(lab), &labels, DType::F32)?;
            write_file(&dir.join(dom), &Tensor::full(&[s.len()], s.domain as f64), DType::F32)?;
        }
        let manifest = Manifest {
            seed: self.seed,
            classes: CLASSES,
            image_size: IMAGE_SIZE,
            splits: self
                .splits()
                .map(|s| SplitEntry {
                    name: s.name.clone(),
                    domain: s.domain,
                    size: s.len(),
                })
                .collect(),
            domains: self.domains.clone(),
        };
        let text = toml::to_string(&manifest).expect("manifest serializes");
        fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path)
            .map_err(|e| Error::invalid("dataset", format!("{}: {e}", path.display())))?;
        let m: Manifest =
            toml::from_str(&text).map_err(|e| Error::invalid("dataset", format!("{}: {e}", path.display())))?;
        if m.classes != CLASSES || m.image_size != IMAGE_SIZE {
            return Err(Error::invalid(
                "dataset",
                format!("{}: unsupported classes/image_size {}/{}", path.display(), m.classes, m.image_size),
            ));
        }
        let mut splits = Vec::new();
        for entry in &m.splits {
            let [img, lab, dom] = split_files(&entry.name);
            let images = read_file(&dir.join(&img))?;
            let labels = read_file(&dir.join(&lab))?;
            let domains = read_file(&dir.join(&dom))?;
            let n = entry.size;
            if images.shape() != [n, 3, IMAGE_SIZE, IMAGE_SIZE] || labels.numel() != n || domains.numel() != n {
                return Err(Error::invalid("dataset", format!("{img}: shape disagrees with manifest size {n}")));
            }
            let labels: Vec<usize> = labels.data().iter().map(|&l| l as usize).collect();
            if labels.iter().any(|&l| l >= CLASSES) {
                return Err(Error::invalid("dataset", format!("{lab}: label out of range")));
            }
            splits.push(Split {
                name: entry.name.clone(),
                domain: entry.domain,
                images,
                labels,
            });
        }
        let mut it = splits.into_iter();
        let train = it
            .next()
            .filter(|s| s.name == "train")
            .ok_or_else(|| Error::invalid("dataset", "manifest must list the train split first"))?;
        Ok(Self {
            seed: m.seed,
            domains: m.domains,
            train,
            targets: it.collect(),
        })
    }
}
