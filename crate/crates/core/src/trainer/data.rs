use ndarray::Array2;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::encoder::{EncoderSpec, LATENT_DIM};
use crate::error::Result;
use crate::worldgen::{dataset_bytes, Dataset, PairedState};

/// Latents of every step of a split, with tasks and expert actions.
#[derive(Clone, Debug)]
pub struct EncodedSplit {
    pub latents: Array2<f64>,
    pub tasks: Vec<usize>,
    pub actions: Array2<f64>,
    pub thetas: Vec<f64>,
}

impl EncodedSplit {
    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn concat(&self, other: &EncodedSplit) -> EncodedSplit {
        EncodedSplit {
            latents: ndarray::concatenate(
                ndarray::Axis(0),
                &[self.latents.view(), other.latents.view()],
            )
            .expect("same latent width"),
            tasks: [self.tasks.as_slice(), &other.tasks].concat(),
            actions: ndarray::concatenate(
                ndarray::Axis(0),
                &[self.actions.view(), other.actions.view()],
            )
            .expect("same action width"),
            thetas: [self.thetas.as_slice(), &other.thetas].concat(),
        }
    }
}

/// Latents of paired states: row `k` of `aux` and `reference` show the same state.
#[derive(Clone, Debug)]
pub struct EncodedPairs {
    pub aux: Array2<f64>,
    pub reference: Array2<f64>,
    pub thetas: Vec<f64>,
}

impl EncodedPairs {
    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }
}

fn encode_rows(encoder: &EncoderSpec, images: &[&[f32]]) -> Result<Array2<f64>> {
    let rows: Vec<Vec<f64>> = images
        .par_iter()
        .map(|img| {
            let mut z = vec![0.0; LATENT_DIM];
            encoder.encode_into(img, &mut z)?;
            Ok(z)
        })
        .collect::<Result<_>>()?;
    Ok(Array2::from_shape_vec((rows.len(), LATENT_DIM), rows.concat()).expect("row count"))
}

pub fn encode_split(encoder: &EncoderSpec, ds: &Dataset) -> Result<EncodedSplit> {
    let steps: Vec<_> = ds
        .trajectories
        .iter()
        .flat_map(|t| t.steps.iter().map(move |s| (t, s)))
        .collect();
    let images: Vec<&[f32]> = steps.iter().map(|(_, s)| s.image.data()).collect();
    let actions: Vec<f64> = steps.iter().flat_map(|(_, s)| s.action).collect();
    Ok(EncodedSplit {
        latents: encode_rows(encoder, &images)?,
        tasks: steps.iter().map(|(t, _)| t.task_id).collect(),
        actions: Array2::from_shape_vec((steps.len(), 2), actions).expect("two action components"),
        thetas: steps.iter().map(|(t, _)| t.view.theta_deg).collect(),
    })
}

pub fn encode_pairs(encoder: &EncoderSpec, pairs: &[PairedState]) -> Result<EncodedPairs> {
    let aux: Vec<&[f32]> = pairs.iter().map(|p| p.auxiliary.data()).collect();
    let reference: Vec<&[f32]> = pairs.iter().map(|p| p.reference.data()).collect();
    Ok(EncodedPairs {
        aux: encode_rows(encoder, &aux)?,
        reference: encode_rows(encoder, &reference)?,
        thetas: pairs.iter().map(|p| p.theta_deg).collect(),
    })
}

pub(crate) fn dataset_digest(ds: &Dataset) -> String {
    hex::encode(Sha256::digest(dataset_bytes(ds)))
}

/// Encoded splits for every training arm, built once per dataset.
///
/// `reference` is `D_R`, `multiview` is `D_M` (whose steps line up one to
/// one with `pairs`), and `reference_large` is the equal-budget reference-only
/// set used by the reference baseline.
pub struct PreparedData {
    pub encoder: EncoderSpec,
    pub reference: EncodedSplit,
    pub multiview: EncodedSplit,
    pub pairs: EncodedPairs,
    pub reference_large: Option<EncodedSplit>,
    pub aux_views: Vec<f64>,
    pub digests: Vec<(String, String)>,
}

impl PreparedData {
    pub fn new(
        encoder: EncoderSpec,
        d_r: &Dataset,
        d_m: &Dataset,
        d_r_large: Option<&Dataset>,
    ) -> Result<Self> {
        let mut aux_views: Vec<f64> = d_m.trajectories.iter().map(|t| t.view.theta_deg).collect();
        aux_views.sort_by(f64::total_cmp);
        aux_views.dedup();
        let mut digests = vec![
            ("d_r".to_string(), dataset_digest(d_r)),
            ("d_m".to_string(), dataset_digest(d_m)),
        ];
        if let Some(large) = d_r_large {
            digests.push(("d_r_large".to_string(), dataset_digest(large)));
        }
        Ok(PreparedData {
            reference: encode_split(&encoder, d_r)?,
            multiview: encode_split(&encoder, d_m)?,
            pairs: encode_pairs(&encoder, &d_m.paired_states)?,
            reference_large: d_r_large.map(|d| encode_split(&encoder, d)).transpose()?,
            encoder,
            aux_views,
            digests,
        })
    }

    pub(crate) fn digests_for(&self, names: &[&str]) -> Vec<(String, String)> {
        self.digests
            .iter()
            .filter(|(n, _)| names.contains(&n.as_str()))
            .cloned()
            .collect()
    }
}
