use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::EncoderSpec;
use crate::error::{Error, Result};
use crate::policy::LearnedController;
use crate::seed::{self, angle_key, tag};
use crate::trainer::TrainedBundle;
use crate::worldgen::{
    sample_scene, simulate_rollout, Controller, ViewSpec, DEFAULT_HORIZON, TASK_COUNT,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub viewpoints: Vec<f64>,
    pub episodes_per_view: usize,
    pub horizon: usize,
    pub seed: u64,
}

impl Default for SweepSpec {
    /// 0° and ±10° … ±90°.
    fn default() -> Self {
        let mut viewpoints = vec![0.0];
        for k in 1..=9 {
            let t = 10.0 * k as f64;
            viewpoints.extend([-t, t]);
        }
        viewpoints.sort_by(f64::total_cmp);
        SweepSpec {
            viewpoints,
            episodes_per_view: 50,
            horizon: DEFAULT_HORIZON,
            seed: 0,
        }
    }
}

impl SweepSpec {
    pub fn with_views(viewpoints: Vec<f64>, episodes_per_view: usize, seed: u64) -> Self {
        SweepSpec {
            viewpoints,
            episodes_per_view,
            horizon: DEFAULT_HORIZON,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.viewpoints.is_empty() {
            return Err(Error::InvalidConfig(
                "sweep needs at least one viewpoint".into(),
            ));
        }
        if self.episodes_per_view == 0 || self.horizon == 0 {
            return Err(Error::InvalidConfig(
                "episodes and horizon must be positive".into(),
            ));
        }
        for &t in &self.viewpoints {
            if t.abs() > 90.0 {
                return Err(Error::InvalidConfig(format!(
                    "sweep viewpoint {t} outside [-90, 90]"
                )));
            }
            ViewSpec::new(t)?;
        }
        Ok(())
    }

    /// Scene seed of episode `episode` at `theta_deg`; independent of the
    /// other viewpoints in the sweep.
    pub fn episode_seed(&self, theta_deg: f64, episode: usize) -> u64 {
        seed::derive(&[
            self.seed,
            tag::EPISODE,
            angle_key(theta_deg),
            episode as u64,
        ])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewResult {
    pub theta_deg: f64,
    pub episodes: usize,
    pub successes: usize,
    pub mean_steps: f64,
}

impl ViewResult {
    pub fn rate(&self) -> f64 {
        self.successes as f64 / self.episodes as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub arm: String,
    pub seed: u64,
    pub views: Vec<ViewResult>,
}

impl SweepResult {
    pub fn view(&self, theta_deg: f64) -> Option<&ViewResult> {
        self.views.iter().find(|v| v.theta_deg == theta_deg)
    }

    /// Uniform mean of per-view success rates over `thetas`, or over every
    /// swept view when `thetas` is `None`. Missing views are an error.
    pub fn mean_success(&self, thetas: Option<&[f64]>) -> Result<f64> {
        let rates: Vec<f64> = match thetas {
            None => self.views.iter().map(ViewResult::rate).collect(),
            Some(ts) => ts
                .iter()
                .map(|&t| {
                    self.view(t)
                        .map(ViewResult::rate)
                        .ok_or_else(|| Error::InvalidConfig(format!("viewpoint {t} was not swept")))
                })
                .collect::<Result<_>>()?,
        };
        if rates.is_empty() {
            return Err(Error::InvalidConfig("no viewpoints to average".into()));
        }
        Ok(rates.iter().sum::<f64>() / rates.len() as f64)
    }
}

/// Evaluates a trained bundle with its own encoder.
pub fn sweep(bundle: &TrainedBundle, spec: &SweepSpec) -> Result<SweepResult> {
    let encoder = EncoderSpec::from_seed(bundle.provenance.encoder_seed);
    let controller = LearnedController {
        policy: &bundle.policy,
        fusion: bundle.fusion.as_ref(),
        encoder: &encoder,
    };
    sweep_controller(
        &controller,
        bundle.arm().label(),
        bundle.provenance.config.seed,
        spec,
    )
}

/// Runs `spec` with any controller. Episodes run in parallel; results are
/// reduced in viewpoint order.
pub fn sweep_controller<C: Controller + Sync>(
    controller: &C,
    arm: &str,
    seed: u64,
    spec: &SweepSpec,
) -> Result<SweepResult> {
    spec.validate()?;
    let jobs: Vec<(f64, usize)> = spec
        .viewpoints
        .iter()
        .flat_map(|&t| (0..spec.episodes_per_view).map(move |e| (t, e)))
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(theta, episode)| {
            let wrap = |source| Error::EpisodeFault {
                theta_deg: theta,
                episode,
                source: Box::new(source),
            };
            let scene = sample_scene(episode % TASK_COUNT, spec.episode_seed(theta, episode))
                .map_err(wrap)?;
            let view = ViewSpec::new(theta)?;
            simulate_rollout(controller, &scene, &view, spec.horizon).map_err(wrap)
        })
        .collect::<Result<Vec<_>>>()?;
    let views = outcomes
        .chunks(spec.episodes_per_view)
        .zip(&spec.viewpoints)
        .map(|(chunk, &theta_deg)| ViewResult {
            theta_deg,
            episodes: chunk.len(),
            successes: chunk.iter().filter(|o| o.success).count(),
            mean_steps: chunk.iter().map(|o| o.steps_taken).sum::<usize>() as f64
                / chunk.len() as f64,
        })
        .collect();
    Ok(SweepResult {
        arm: arm.to_string(),
        seed,
        views,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldgen::{ExpertController, Observation, Vec2};

    #[test]
    fn default_spec_is_symmetric_and_has_reference() {
        let s = SweepSpec::default();
        assert_eq!(s.viewpoints.len(), 19);
        assert!(s.viewpoints.contains(&0.0));
        for &t in &s.viewpoints {
            assert!(s.viewpoints.contains(&-t));
        }
        assert_eq!((s.episodes_per_view, s.horizon), (50, 50));
    }

    #[test]
    fn empty_or_out_of_range_specs_rejected() {
        assert!(SweepSpec::with_views(vec![], 5, 0).validate().is_err());
        assert!(SweepSpec::with_views(vec![120.0], 5, 0).validate().is_err());
        assert!(SweepSpec::with_views(vec![0.0], 0, 0).validate().is_err());
    }

    #[test]
    fn expert_succeeds_everywhere_on_a_small_sweep() {
        let spec = SweepSpec::with_views(vec![-90.0, 0.0, 30.0], 10, 3);
        let r = sweep_controller(&ExpertController, "expert", 3, &spec).unwrap();
        for v in &r.views {
            assert_eq!(v.successes, v.episodes);
        }
        assert_eq!(r.mean_success(None).unwrap(), 1.0);
    }

    #[test]
    fn zero_controller_never_succeeds() {
        let zero = |_: &Observation<'_>| -> Vec2 { [0.0, 0.0] };
        let spec = SweepSpec::with_views(vec![0.0, 45.0], 12, 1);
        let r = sweep_controller(&zero, "zero", 1, &spec).unwrap();
        assert!(r
            .views
            .iter()
            .all(|v| v.successes == 0 && v.mean_steps == 50.0));
    }

    #[test]
    fn adding_views_keeps_existing_episodes() {
        let biased = |o: &Observation<'_>| -> Vec2 {
            let t = o.scene.target().center;
            [(t[0] - o.gripper[0]) * 0.5, 0.3 * (t[1] - o.gripper[1])]
        };
        let a =
            sweep_controller(&biased, "x", 5, &SweepSpec::with_views(vec![10.0], 9, 5)).unwrap();
        let b = sweep_controller(
            &biased,
            "x",
            5,
            &SweepSpec::with_views(vec![-20.0, 10.0], 9, 5),
        )
        .unwrap();
        assert_eq!(a.views[0], b.views[1]);
    }

    #[test]
    fn non_finite_action_carries_episode_context() {
        let bad = |_: &Observation<'_>| -> Vec2 { [f64::NAN, 0.0] };
        let err =
            sweep_controller(&bad, "bad", 0, &SweepSpec::with_views(vec![20.0], 1, 0)).unwrap_err();
        assert!(
            matches!(err, Error::EpisodeFault { theta_deg, episode: 0, .. } if theta_deg == 20.0)
        );
    }

    #[test]
    fn mean_success_is_uniform_over_views() {
        let r = SweepResult {
            arm: "a".into(),
            seed: 0,
            views: vec![
                ViewResult {
                    theta_deg: 0.0,
                    episodes: 4,
                    successes: 4,
                    mean_steps: 1.0,
                },
                ViewResult {
                    theta_deg: 10.0,
                    episodes: 2,
                    successes: 0,
                    mean_steps: 1.0,
                },
            ],
        };
        assert_eq!(r.mean_success(None).unwrap(), 0.5);
        assert_eq!(r.mean_success(Some(&[10.0])).unwrap(), 0.0);
        assert!(r.mean_success(Some(&[20.0])).is_err());
    }
}
