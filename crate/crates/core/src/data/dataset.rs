use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{DataError, ImageSignal};
use crate::linalg::{gemm, DenseMatrix};
use crate::rng::{derive_seed, seeded};
use crate::tomo::{add_noise, normalise_sinograms, NoiseModel, RadonOperator};

/// One training or test example. `y_clean` is the normalised noiseless
/// sinogram, `y_noisy` the same plus noise.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y_clean: Vec<f64>,
    pub y_noisy: Vec<f64>,
    pub paired: bool,
    /// Per-entry noise standard deviation that was applied.
    pub noise_level: f64,
}

#[derive(Clone, Debug)]
pub struct DatasetSplit {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    /// Raw sinograms were divided by this; `y_clean = (A / factor)·x`.
    pub normalisation: f64,
    pub image_side: usize,
}

impl DatasetSplit {
    pub fn paired_count(&self) -> usize {
        self.train.iter().filter(|s| s.paired).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    /// The same model for every sample (seed re-derived per sample).
    Fixed { model: NoiseModel },
    /// Per-sample Gaussian level drawn uniformly from `[min, max]`.
    UniformLevel { min: f64, max: f64, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DatasetOptions {
    pub noise: NoiseSpec,
    /// Fraction of training samples flagged as paired.
    pub paired_fraction: f64,
    /// Fraction of all samples placed in the training split.
    pub split_fraction: f64,
    /// Remove unpaired samples from the training split.
    pub drop_unpaired: bool,
    /// When positive, the last this-many images form the test split in
    /// their given order and `split_fraction` is ignored.
    pub held_out_tail: usize,
    pub seed: u64,
}

/// Projects, normalises by the largest clean-sinogram entry, adds noise,
/// splits and assigns paired flags. Test samples are always paired.
pub fn build_dataset(
    images: &[ImageSignal],
    operator: &RadonOperator,
    opts: &DatasetOptions,
) -> Result<DatasetSplit, DataError> {
    for (name, f) in [("paired_fraction", opts.paired_fraction), ("split_fraction", opts.split_fraction)] {
        if !(f > 0.0 && f <= 1.0) {
            return Err(DataError::Options(format!("{name} must lie in (0, 1], got {f}")));
        }
    }
    if images.is_empty() {
        return Err(DataError::Options("no images".into()));
    }
    let side = operator.geometry.image_side;
    if let Some(bad) = images.iter().find(|i| i.side != side) {
        return Err(DataError::SideMismatch(side, bad.side));
    }
    let m = side * side;
    let mut xs = DenseMatrix::zeros(images.len(), m);
    for (i, img) in images.iter().enumerate() {
        xs.row_mut(i).copy_from_slice(&img.pixels);
    }
    let n = operator.matrix.rows();
    let mut ys = DenseMatrix::zeros(images.len(), n);
    gemm(1.0, &xs, false, &operator.matrix, true, 0.0, &mut ys);
    let raw: Vec<Vec<f64>> = (0..images.len()).map(|i| ys.row(i).to_vec()).collect();
    let (clean, factor) = normalise_sinograms(&raw)?;

    let mut samples = Vec::with_capacity(images.len());
    for (i, (img, y)) in images.iter().zip(clean).enumerate() {
        let model = match opts.noise {
            NoiseSpec::Fixed { model } => model.with_seed(derive_seed(model.seed, i as u64)),
            NoiseSpec::UniformLevel { min, max, seed } => {
                if !(0.0 <= min && min <= max) {
                    return Err(DataError::Options(format!("noise range [{min}, {max}] is invalid")));
                }
                let mut rng = seeded(derive_seed(seed ^ 0x5eed_1e7e1, i as u64));
                let level = if max > min { rng.random_range(min..=max) } else { min };
                NoiseModel::gaussian_level(level, derive_seed(seed, i as u64))
            }
        };
        let level = model.sigma_for(&y)?;
        samples.push(Sample {
            x: img.pixels.clone(),
            y_noisy: add_noise(&y, &model)?,
            y_clean: y,
            paired: true,
            noise_level: level,
        });
    }

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let n_train = if opts.held_out_tail > 0 {
        if opts.held_out_tail >= samples.len() {
            return Err(DataError::Options(format!(
                "held-out tail of {} leaves no training images out of {}",
                opts.held_out_tail,
                samples.len()
            )));
        }
        samples.len() - opts.held_out_tail
    } else {
        order.shuffle(&mut seeded(derive_seed(opts.seed, 0x5b11)));
        ((opts.split_fraction * samples.len() as f64).round() as usize).clamp(1, samples.len())
    };
    let mut slots: Vec<Option<Sample>> = samples.into_iter().map(Some).collect();
    let mut train: Vec<Sample> = order[..n_train].iter().map(|&i| slots[i].take().expect("unique")).collect();
    let test: Vec<Sample> = order[n_train..].iter().map(|&i| slots[i].take().expect("unique")).collect();

    let n_paired = (opts.paired_fraction * train.len() as f64).round() as usize;
    let mut flags: Vec<usize> = (0..train.len()).collect();
    flags.shuffle(&mut seeded(derive_seed(opts.seed, 0x9a12)));
    for s in &mut train {
        s.paired = false;
    }
    for &i in &flags[..n_paired] {
        train[i].paired = true;
    }
    if opts.drop_unpaired {
        train.retain(|s| s.paired);
    }
    Ok(DatasetSplit {
        train,
        test,
        normalisation: factor,
        image_side: side,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_phantoms, PhantomRule};
    use crate::tomo::{assemble_radon, TomoGeometry};

    fn options(paired: f64, split: f64) -> DatasetOptions {
        DatasetOptions {
            noise: NoiseSpec::Fixed {
                model: NoiseModel::gaussian_level(0.05, 3),
            },
            paired_fraction: paired,
            split_fraction: split,
            drop_unpaired: false,
            held_out_tail: 0,
            seed: 17,
        }
    }

    #[test]
    fn counts_and_consistency() {
        let op = assemble_radon(&TomoGeometry::new(8, 6, 8)).unwrap();
        let imgs = generate_phantoms(1000, 8, &PhantomRule::default(), 1);
        let all = build_dataset(&imgs, &op, &options(1.0, 1.0)).unwrap();
        assert_eq!(all.paired_count(), 1000);
        let tenth = build_dataset(&imgs, &op, &options(0.1, 1.0)).unwrap();
        assert_eq!(tenth.paired_count(), 100);

        let split = build_dataset(&imgs, &op, &options(0.5, 0.9)).unwrap();
        assert_eq!((split.train.len(), split.test.len()), (900, 100));
        assert!(split.test.iter().all(|s| s.paired));
        let max = split
            .train
            .iter()
            .chain(&split.test)
            .flat_map(|s| &s.y_clean)
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        assert_eq!(max, 1.0);
        let scaled = op.matrix.scaled(1.0 / split.normalisation);
        for s in split.train.iter().take(20) {
            let y = scaled.matvec(&s.x).unwrap();
            for (a, b) in y.iter().zip(&s.y_clean) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let mut dropped = options(0.5, 0.9);
        dropped.drop_unpaired = true;
        let d = build_dataset(&imgs, &op, &dropped).unwrap();
        assert_eq!(d.train.len(), 450);
        assert_eq!(d.test.len(), 100);
    }

    #[test]
    fn reproducible_split() {
        let op = assemble_radon(&TomoGeometry::new(8, 4, 8)).unwrap();
        let imgs = generate_phantoms(50, 8, &PhantomRule::default(), 2);
        let a = build_dataset(&imgs, &op, &options(0.3, 0.8)).unwrap();
        let b = build_dataset(&imgs, &op, &options(0.3, 0.8)).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        let mut other = options(0.3, 0.8);
        other.seed = 18;
        assert_ne!(build_dataset(&imgs, &op, &other).unwrap().train, a.train);
    }

    #[test]
    fn mixed_noise_levels() {
        let op = assemble_radon(&TomoGeometry::new(8, 4, 8)).unwrap();
        let imgs = generate_phantoms(200, 8, &PhantomRule::default(), 3);
        let mut opts = options(1.0, 1.0);
        opts.noise = NoiseSpec::UniformLevel { min: 0.0, max: 0.2, seed: 4 };
        let d = build_dataset(&imgs, &op, &opts).unwrap();
        let levels: Vec<f64> = d.train.iter().map(|s| s.noise_level).collect();
        assert!(levels.iter().all(|&l| (0.0..=0.2).contains(&l)));
        let mean = levels.iter().sum::<f64>() / levels.len() as f64;
        assert!((mean - 0.1).abs() < 0.02);
    }

    #[test]
    fn held_out_tail_keeps_order() {
        let op = assemble_radon(&TomoGeometry::new(8, 4, 8)).unwrap();
        let imgs = generate_phantoms(30, 8, &PhantomRule::default(), 5);
        let mut opts = options(1.0, 0.5);
        opts.held_out_tail = 10;
        let d = build_dataset(&imgs, &op, &opts).unwrap();
        assert_eq!((d.train.len(), d.test.len()), (20, 10));
        for (s, img) in d.test.iter().zip(&imgs[20..]) {
            assert_eq!(s.x, img.pixels);
        }
        opts.held_out_tail = 30;
        assert!(build_dataset(&imgs, &op, &opts).is_err());
    }

    #[test]
    fn invalid_fractions() {
        let op = assemble_radon(&TomoGeometry::new(8, 4, 8)).unwrap();
        let imgs = generate_phantoms(5, 8, &PhantomRule::default(), 3);
        assert!(build_dataset(&imgs, &op, &options(0.0, 1.0)).is_err());
        assert!(build_dataset(&imgs, &op, &options(0.5, 1.5)).is_err());
    }
}
