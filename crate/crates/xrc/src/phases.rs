//! Phased training-set construction: eight subsets per fold sharing a
//! fixed COVID-19 core and a shared pneumonia core, with pairwise-disjoint
//! unique pneumonia/normal pools cycling fresh majority-class images
//! through the phases.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::RangeInclusive;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Result, XrcError};
use crate::ingest::{ClassLabel, Manifest, Source, Split, NUM_CLASSES};
use crate::seed::stream_rng;

/// Pool sizes for one phase plan. Defaults follow the published regimen:
/// 8 phases of 149 COVID + 34 shared pneumonia + 200 unique pneumonia +
/// 250 unique normal = 633 images each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseLayout {
    pub n_phases: usize,
    pub shared_pneumonia: usize,
    pub unique_pneumonia_per_phase: usize,
    pub unique_normal_per_phase: usize,
}

impl Default for PhaseLayout {
    fn default() -> Self {
        PhaseLayout {
            n_phases: 8,
            shared_pneumonia: 34,
            unique_pneumonia_per_phase: 200,
            unique_normal_per_phase: 250,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseSet {
    pub phase_index: usize,
    pub image_ids: BTreeSet<String>,
    pub class_histogram: [usize; NUM_CLASSES],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhasePlan {
    pub fold_id: usize,
    pub phases: Vec<PhaseSet>,
    pub covid_core: BTreeSet<String>,
    pub shared_pneumonia: BTreeSet<String>,
}

impl PhasePlan {
    /// All image ids used by any phase.
    pub fn union(&self) -> BTreeSet<String> {
        let mut u = BTreeSet::new();
        for p in &self.phases {
            u.extend(p.image_ids.iter().cloned());
        }
        u
    }

    /// One `phase_index,image_id` row per membership, phases in order.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path)?;
        wtr.write_record(["phase_index", "image_id"])?;
        for p in &self.phases {
            for id in &p.image_ids {
                wtr.write_record([p.phase_index.to_string(), id.clone()])?;
            }
        }
        wtr.flush().map_err(|e| XrcError::io(path, e))?;
        Ok(())
    }

    pub fn read(path: &Path, fold_id: usize, manifest: &Manifest) -> Result<PhasePlan> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let classes: BTreeMap<&str, ClassLabel> = manifest
            .records()
            .iter()
            .map(|r| (r.image_id.as_str(), r.class_label))
            .collect();
        let mut phases: BTreeMap<usize, PhaseSet> = BTreeMap::new();
        for row in rdr.records() {
            let row = row?;
            let idx: usize = row[0]
                .parse()
                .map_err(|_| XrcError::Data(format!("bad phase index {:?}", &row[0])))?;
            let id = row[1].to_string();
            let class = *classes
                .get(id.as_str())
                .ok_or_else(|| XrcError::Data(format!("phase plan references unknown id {id:?}")))?;
            let entry = phases.entry(idx).or_insert_with(|| PhaseSet {
                phase_index: idx,
                image_ids: BTreeSet::new(),
                class_histogram: [0; NUM_CLASSES],
            });
            if entry.image_ids.insert(id) {
                entry.class_histogram[class.index()] += 1;
            }
        }
        let phases: Vec<PhaseSet> = phases.into_values().collect();
        let (covid_core, shared_pneumonia) = intersect_cores(&phases, &classes);
        Ok(PhasePlan {
            fold_id,
            phases,
            covid_core,
            shared_pneumonia,
        })
    }
}

fn intersect_cores(
    phases: &[PhaseSet],
    classes: &BTreeMap<&str, ClassLabel>,
) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut common: Option<BTreeSet<String>> = None;
    for p in phases {
        common = Some(match common {
            None => p.image_ids.clone(),
            Some(c) => c.intersection(&p.image_ids).cloned().collect(),
        });
    }
    let common = common.unwrap_or_default();
    let mut covid = BTreeSet::new();
    let mut pneu = BTreeSet::new();
    for id in common {
        match classes.get(id.as_str()) {
            Some(ClassLabel::Covid19) => {
                covid.insert(id);
            }
            Some(ClassLabel::Pneumonia) => {
                pneu.insert(id);
            }
            _ => {}
        }
    }
    (covid, pneu)
}

/// Builds the per-fold phase plan from the manifest's TRAIN pool.
///
/// The COVID core is the whole TRAIN COVID pool. The shared pneumonia core
/// prefers Cohen-sourced pneumonia records. Unique pools are drawn without
/// replacement from one per-class shuffle, so they are pairwise disjoint by
/// construction. All draws are seeded with `(seed, fold_id, class)` mixed
/// into the stream, so different folds with the same base seed get
/// different pools.
pub fn build_phase_plan(
    manifest: &Manifest,
    fold_id: usize,
    seed: u64,
    layout: &PhaseLayout,
) -> Result<PhasePlan> {
    if layout.n_phases == 0 {
        return Err(XrcError::Config("phase layout needs at least one phase".into()));
    }
    let train: Vec<_> = manifest.records_in(Split::Train).collect();

    let covid_core: BTreeSet<String> = train
        .iter()
        .filter(|r| r.class_label == ClassLabel::Covid19)
        .map(|r| r.image_id.clone())
        .collect();

    // Shared pneumonia core: Cohen records first, then (for corpora
    // without a Cohen pool) a deterministic draw from the rest.
    let mut pneumonia: Vec<&str> = Vec::new();
    let mut cohen_pneumonia: Vec<&str> = Vec::new();
    for r in &train {
        if r.class_label == ClassLabel::Pneumonia {
            if r.source == Source::CohenXray {
                cohen_pneumonia.push(&r.image_id);
            } else {
                pneumonia.push(&r.image_id);
            }
        }
    }
    cohen_pneumonia.sort_unstable();
    pneumonia.sort_unstable();
    let mut shared_rng = stream_rng(seed, "shared-pneumonia", &[fold_id as u64]);
    cohen_pneumonia.shuffle(&mut shared_rng);
    let mut shared_pneumonia: BTreeSet<String> = cohen_pneumonia
        .iter()
        .take(layout.shared_pneumonia)
        .map(|s| s.to_string())
        .collect();
    if shared_pneumonia.len() < layout.shared_pneumonia {
        let missing = layout.shared_pneumonia - shared_pneumonia.len();
        pneumonia.shuffle(&mut shared_rng);
        let take: Vec<&str> = pneumonia.drain(..missing.min(pneumonia.len())).collect();
        shared_pneumonia.extend(take.iter().map(|s| s.to_string()));
    }
    if shared_pneumonia.len() < layout.shared_pneumonia {
        return Err(XrcError::InsufficientPool {
            phase: 0,
            class: ClassLabel::Pneumonia.as_str().into(),
            needed: layout.shared_pneumonia,
            available: shared_pneumonia.len(),
        });
    }
    // Remaining Cohen pneumonia joins the unique pool candidates.
    pneumonia.extend(
        cohen_pneumonia
            .iter()
            .skip(layout.shared_pneumonia)
            .copied(),
    );

    let mut normal: Vec<&str> = train
        .iter()
        .filter(|r| r.class_label == ClassLabel::Normal)
        .map(|r| r.image_id.as_str())
        .collect();
    pneumonia.sort_unstable();
    normal.sort_unstable();

    let unique_pneumonia = draw_unique_pools(
        pneumonia,
        layout.n_phases,
        layout.unique_pneumonia_per_phase,
        ClassLabel::Pneumonia,
        seed,
        fold_id,
    )?;
    let unique_normal = draw_unique_pools(
        normal,
        layout.n_phases,
        layout.unique_normal_per_phase,
        ClassLabel::Normal,
        seed,
        fold_id,
    )?;

    let mut phases = Vec::with_capacity(layout.n_phases);
    for phase_index in 0..layout.n_phases {
        let mut image_ids: BTreeSet<String> = covid_core.clone();
        image_ids.extend(shared_pneumonia.iter().cloned());
        image_ids.extend(unique_pneumonia[phase_index].iter().cloned());
        image_ids.extend(unique_normal[phase_index].iter().cloned());
        let class_histogram = [
            unique_normal[phase_index].len(),
            shared_pneumonia.len() + unique_pneumonia[phase_index].len(),
            covid_core.len(),
        ];
        phases.push(PhaseSet {
            phase_index,
            image_ids,
            class_histogram,
        });
    }

    Ok(PhasePlan {
        fold_id,
        phases,
        covid_core,
        shared_pneumonia,
    })
}

fn draw_unique_pools(
    mut pool: Vec<&str>,
    n_phases: usize,
    per_phase: usize,
    class: ClassLabel,
    seed: u64,
    fold_id: usize,
) -> Result<Vec<Vec<String>>> {
    let mut rng = stream_rng(seed, "unique-pool", &[fold_id as u64, class.index() as u64]);
    pool.shuffle(&mut rng);
    let mut pools = Vec::with_capacity(n_phases);
    let mut offset = 0usize;
    for phase in 0..n_phases {
        if offset + per_phase > pool.len() {
            return Err(XrcError::InsufficientPool {
                phase,
                class: class.as_str().into(),
                needed: per_phase,
                available: pool.len() - offset,
            });
        }
        pools.push(pool[offset..offset + per_phase].iter().map(|s| s.to_string()).collect());
        offset += per_phase;
    }
    Ok(pools)
}

/// Contiguous epoch ranges, one per phase, in phase order.
pub fn phase_schedule(
    plan: &PhasePlan,
    epochs_per_phase: usize,
) -> Result<Vec<(usize, RangeInclusive<usize>)>> {
    if epochs_per_phase == 0 {
        return Err(XrcError::Config("epochs_per_phase must be at least 1".into()));
    }
    Ok(plan
        .phases
        .iter()
        .map(|p| {
            let start = p.phase_index * epochs_per_phase + 1;
            (p.phase_index, start..=start + epochs_per_phase - 1)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{build_manifest, generate_synthetic_corpus, SplitSpec, SyntheticSpec};
    use tempfile::tempdir;

    fn tiny_manifest() -> Manifest {
        // 5 COVID + 2 shared pneumonia + 8 unique pneumonia + 10 unique
        // normal, everything in TRAIN.
        let records = crate::ingest::synthetic_records_for_tests(10, 10, 5);
        build_manifest(
            records,
            &SplitSpec {
                train_covid: 5,
                train_pneumonia: 10,
                train_normal: 10,
                cohen_pneumonia_train: 2,
                patient_level: false,
            },
            3,
        )
        .unwrap()
    }

    #[test]
    fn two_phase_synthetic_plan_disjointness() {
        let manifest = tiny_manifest();
        let layout = PhaseLayout {
            n_phases: 2,
            shared_pneumonia: 2,
            unique_pneumonia_per_phase: 4,
            unique_normal_per_phase: 5,
        };
        let plan = build_phase_plan(&manifest, 1, 7, &layout).unwrap();
        assert_eq!(plan.phases.len(), 2);
        for p in &plan.phases {
            assert_eq!(p.image_ids.len(), 16);
            assert_eq!(p.class_histogram, [5, 6, 5]);
            for id in plan.covid_core.iter().chain(&plan.shared_pneumonia) {
                assert!(p.image_ids.contains(id));
            }
        }
        // Brute-force: the two unique pools must not overlap at all.
        let core: BTreeSet<&String> =
            plan.covid_core.iter().chain(&plan.shared_pneumonia).collect();
        let inter: Vec<_> = plan.phases[0]
            .image_ids
            .intersection(&plan.phases[1].image_ids)
            .filter(|id| !core.contains(id))
            .collect();
        assert!(inter.is_empty(), "unique pools overlap: {inter:?}");
    }

    #[test]
    fn degenerate_single_phase_layout() {
        let manifest = tiny_manifest();
        let layout = PhaseLayout {
            n_phases: 1,
            shared_pneumonia: 2,
            unique_pneumonia_per_phase: 0,
            unique_normal_per_phase: 0,
        };
        let plan = build_phase_plan(&manifest, 1, 7, &layout).unwrap();
        assert_eq!(plan.phases.len(), 1);
        let expected: BTreeSet<String> = plan
            .covid_core
            .iter()
            .chain(&plan.shared_pneumonia)
            .cloned()
            .collect();
        assert_eq!(plan.phases[0].image_ids, expected);
    }

    #[test]
    fn insufficient_pool_names_phase_and_class() {
        let manifest = tiny_manifest();
        let layout = PhaseLayout {
            n_phases: 3,
            shared_pneumonia: 2,
            unique_pneumonia_per_phase: 4,
            unique_normal_per_phase: 2,
        };
        let err = build_phase_plan(&manifest, 1, 7, &layout).unwrap_err();
        match err {
            XrcError::InsufficientPool { phase, class, .. } => {
                assert_eq!(phase, 2);
                assert_eq!(class, "PNEUMONIA");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schedule_ranges() {
        let manifest = tiny_manifest();
        let layout = PhaseLayout {
            n_phases: 8,
            shared_pneumonia: 2,
            unique_pneumonia_per_phase: 1,
            unique_normal_per_phase: 1,
        };
        let plan = build_phase_plan(&manifest, 1, 7, &layout).unwrap();
        let sched = phase_schedule(&plan, 100).unwrap();
        assert_eq!(sched[0], (0, 1..=100));
        assert_eq!(sched[7], (7, 701..=800));
        let sched = phase_schedule(&plan, 3).unwrap();
        assert_eq!(sched[7], (7, 22..=24));
        assert_eq!(sched.iter().map(|(_, r)| r.clone().count()).sum::<usize>(), 24);
        let one = phase_schedule(&plan, 1).unwrap();
        assert!(one.iter().all(|(_, r)| r.clone().count() == 1));
        assert!(phase_schedule(&plan, 0).is_err());
    }

    #[test]
    fn fold_and_seed_sensitivity() {
        let manifest = tiny_manifest();
        let layout = PhaseLayout {
            n_phases: 2,
            shared_pneumonia: 2,
            unique_pneumonia_per_phase: 4,
            unique_normal_per_phase: 5,
        };
        let a = build_phase_plan(&manifest, 1, 7, &layout).unwrap();
        let a2 = build_phase_plan(&manifest, 1, 7, &layout).unwrap();
        let b = build_phase_plan(&manifest, 2, 7, &layout).unwrap();
        let c = build_phase_plan(&manifest, 1, 8, &layout).unwrap();
        assert_eq!(a, a2);
        assert_ne!(a.phases, b.phases, "fold entropy must change the draw");
        assert_ne!(a.phases, c.phases, "seed must change the draw");
    }

    #[test]
    fn plan_roundtrip_through_file() {
        let dir = tempdir().unwrap();
        let corpus_dir = dir.path().join("imgs");
        let spec = SyntheticSpec::scaled(60, 16, 3);
        let records = generate_synthetic_corpus(&spec, &corpus_dir).unwrap();
        let manifest = build_manifest(
            records,
            &SplitSpec {
                train_covid: 4,
                train_pneumonia: 6,
                train_normal: 4,
                cohen_pneumonia_train: 2,
                patient_level: false,
            },
            1,
        )
        .unwrap();
        let layout = PhaseLayout {
            n_phases: 2,
            shared_pneumonia: 2,
            unique_pneumonia_per_phase: 2,
            unique_normal_per_phase: 2,
        };
        let plan = build_phase_plan(&manifest, 1, 5, &layout).unwrap();
        let path = dir.path().join("plan.csv");
        plan.write(&path).unwrap();
        let back = PhasePlan::read(&path, 1, &manifest).unwrap();
        assert_eq!(plan.phases, back.phases);
        assert_eq!(plan.covid_core, back.covid_core);
        assert_eq!(plan.shared_pneumonia, back.shared_pneumonia);
    }
}
