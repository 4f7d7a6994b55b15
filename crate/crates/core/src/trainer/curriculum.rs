use serde::{Deserialize, Serialize};

/// Schedule of auxiliary viewpoint groups for fusion training.
///
/// Group `g` unlocks at epoch `g · epochs_per_group`; the last group absorbs
/// the remainder. Once unlocked a group stays active.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curriculum {
    groups: Vec<Vec<f64>>,
    total_epochs: usize,
}

impl Curriculum {
    /// One group per distinct `|θ|`, nearest views first.
    pub fn progressive(aux_views: &[f64], total_epochs: usize) -> Self {
        let mut mags: Vec<f64> = aux_views.iter().map(|t| t.abs()).collect();
        mags.sort_by(f64::total_cmp);
        mags.dedup();
        let groups = mags
            .into_iter()
            .map(|m| {
                let mut g: Vec<f64> = aux_views.iter().copied().filter(|t| t.abs() == m).collect();
                g.sort_by(f64::total_cmp);
                g
            })
            .collect();
        Curriculum {
            groups,
            total_epochs,
        }
    }

    /// Every auxiliary view from the first epoch.
    pub fn one_pass(aux_views: &[f64], total_epochs: usize) -> Self {
        let mut all = aux_views.to_vec();
        all.sort_by(f64::total_cmp);
        Curriculum {
            groups: vec![all],
            total_epochs,
        }
    }

    pub fn groups(&self) -> &[Vec<f64>] {
        &self.groups
    }

    pub fn epochs_per_group(&self) -> usize {
        if self.groups.is_empty() {
            return 0;
        }
        self.total_epochs / self.groups.len()
    }

    /// Number of groups unlocked at `epoch`.
    pub fn unlocked(&self, epoch: usize) -> usize {
        let per = self.epochs_per_group();
        if per == 0 {
            return self.groups.len();
        }
        (epoch / per + 1).min(self.groups.len())
    }

    /// Active viewpoints at `epoch`, ascending.
    pub fn active_set(&self, epoch: usize) -> Vec<f64> {
        let mut set: Vec<f64> = self.groups[..self.unlocked(epoch)].concat();
        set.sort_by(f64::total_cmp);
        set
    }
}
