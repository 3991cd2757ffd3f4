//! Built-in synthetic market: German day-ahead, IGCC neighbour, actual and
//! flow columns, tendered-demand benchmarks and two aFRR targets.

use std::collections::BTreeMap;

use crate::dataset::{
    synth_generate, Area, ColumnKind, ColumnMeta, FeatureProcess, GroundTruth, Group, Manifest,
    NoiseModel, SynthFeature, SynthSpec, SynthTarget, TargetTerm, TermShape, TimeTable, Timestamp,
};
use crate::error::Result;
use crate::features::{
    EngineeringConfig, FlowBalanceSpec, ForecastErrorSpec, IgccSpec, UnscheduledFlowSpec,
    UpsampleMode,
};

fn feature(meta: ColumnMeta, process: FeatureProcess) -> SynthFeature {
    SynthFeature {
        meta,
        process,
        missing_fraction: 0.0,
    }
}

fn da(name: &str, group: Group) -> ColumnMeta {
    ColumnMeta::new(name, "GW", ColumnKind::DayAhead).with_group(group)
}

fn act(name: &str, group: Group) -> ColumnMeta {
    ColumnMeta::new(name, "GW", ColumnKind::Actual).with_group(group)
}

fn daily(mean: f64, amplitude: f64, phase: f64, noise_sd: f64) -> FeatureProcess {
    FeatureProcess::Daily {
        mean,
        amplitude,
        phase,
        noise_sd,
    }
}

fn ar1(mean: f64, phi: f64, sd: f64) -> FeatureProcess {
    FeatureProcess::Ar1 { mean, phi, sd }
}

fn noisy(base: &str, sd: f64) -> FeatureProcess {
    FeatureProcess::Noisy {
        base: base.to_string(),
        scale: 1.0,
        sd,
    }
}

fn term(feature: &str, coef: f64, shape: TermShape) -> TargetTerm {
    TargetTerm {
        feature: feature.to_string(),
        coef,
        shape,
    }
}

/// Generator spec of the fixture.
pub fn fixture_spec(n_rows: usize, start: Timestamp, seed: u64) -> SynthSpec {
    use TermShape::*;
    let features = vec![
        feature(da("load day-ahead", Group::Load), daily(55.0, 8.0, -30.0, 1.0)),
        feature(da("wind day-ahead", Group::Renewable), ar1(15.0, 0.995, 0.5)),
        feature(da("solar day-ahead", Group::Renewable), daily(5.0, 5.0, -24.0, 0.3)),
        feature(
            ColumnMeta::new("price day-ahead", "EUR/MWh", ColumnKind::DayAhead)
                .with_group(Group::Price)
                .with_resolution(60),
            ar1(45.0, 0.98, 2.0),
        ),
        feature(da("scheduled flow", Group::Flow), ar1(1.0, 0.99, 0.1)),
        feature(
            da("load day-ahead FR", Group::Load).with_area(Area::IgccOther),
            daily(50.0, 6.0, -30.0, 0.8),
        ),
        feature(
            da("load day-ahead NL", Group::Load).with_area(Area::IgccOther),
            daily(12.0, 2.0, -28.0, 0.3),
        ),
        feature(act("load actual", Group::Load), noisy("load day-ahead", 1.0)),
        feature(act("wind actual", Group::Renewable), noisy("wind day-ahead", 0.8)),
        feature(act("solar actual", Group::Renewable), noisy("solar day-ahead", 0.3)),
        feature(act("flow in FR", Group::Flow), ar1(2.0, 0.99, 0.1)),
        feature(act("flow out FR", Group::Flow), ar1(1.0, 0.99, 0.1)),
        feature(act("lignite actual", Group::Dispatchable), ar1(12.0, 0.99, 0.3)),
        feature(
            ColumnMeta::new("tendered_pos", "GW", ColumnKind::Benchmark).with_resolution(240),
            FeatureProcess::White { mean: 2.0, sd: 0.02 },
        ),
        feature(
            ColumnMeta::new("tendered_neg", "GW", ColumnKind::Benchmark).with_resolution(240),
            FeatureProcess::White { mean: 1.9, sd: 0.02 },
        ),
    ];
    let noise = |sd: f64| NoiseModel {
        sd,
        hetero_feature: Some("wind day-ahead".into()),
        hetero_scale: 0.004,
    };
    let pos = SynthTarget {
        intercept: 0.3,
        terms: vec![
            term("load actual", 0.06, Linear),
            term("load day-ahead", -0.06, Linear),
            term("wind day-ahead", 0.05, Linear),
            term("wind actual", -0.05, Linear),
            term("load day-ahead", 0.1, Step { threshold: 60.0 }),
            term("lignite actual", 0.05, Relu { knot: 12.0 }),
            term("flow in FR", 0.03, Linear),
            term("flow out FR", -0.03, Linear),
        ],
        daily_amplitude: 0.04,
        noise: noise(0.04),
        clip_min: Some(0.0),
        ..SynthTarget::new("afrr_pos")
    };
    let neg = SynthTarget {
        intercept: 0.3,
        terms: vec![
            term("load day-ahead", 0.06, Linear),
            term("load actual", -0.06, Linear),
            term("wind actual", 0.05, Linear),
            term("wind day-ahead", -0.05, Linear),
            term("solar day-ahead", 0.02, Relu { knot: 5.0 }),
            term("lignite actual", -0.05, Relu { knot: 11.5 }),
        ],
        daily_amplitude: 0.04,
        daily_phase: 48.0,
        noise: noise(0.04),
        clip_min: Some(0.0),
        ..SynthTarget::new("afrr_neg")
    };
    SynthSpec {
        n_rows,
        start,
        seed,
        features,
        targets: vec![pos, neg],
    }
}

/// Engineering recipe matching [`fixture_spec`].
pub fn fixture_engineering() -> EngineeringConfig {
    EngineeringConfig {
        flow_balances: vec![FlowBalanceSpec {
            name: "physical flow".into(),
            kind: ColumnKind::Actual,
            inflows: vec!["flow in FR".into()],
            outflows: vec!["flow out FR".into()],
        }],
        igcc: vec![IgccSpec {
            name: "IGCC load day-ahead".into(),
            group: Some(Group::Load),
            inputs: BTreeMap::from([
                ("FR".to_string(), "load day-ahead FR".to_string()),
                ("NL".to_string(), "load day-ahead NL".to_string()),
            ]),
        }],
        forecast_errors: ["load", "wind", "solar"]
            .iter()
            .map(|b| ForecastErrorSpec {
                base: b.to_string(),
                forecast: format!("{b} day-ahead"),
                actual: format!("{b} actual"),
            })
            .collect(),
        unscheduled_flow: Some(UnscheduledFlowSpec {
            total: "scheduled flow".into(),
            physical: "physical flow".into(),
        }),
        ..EngineeringConfig::default()
    }
}

/// Manifest of a generated table: `spec`'s columns plus, for the built-in
/// fixture, its engineering recipe and upsampling of coarse columns.
pub fn synth_manifest(spec: &SynthSpec, builtin: bool) -> Manifest {
    let mut manifest = spec.manifest();
    if builtin {
        manifest.engineering = fixture_engineering();
        for col in &mut manifest.columns {
            match col.meta.native_resolution {
                60 => col.upsample = Some(UpsampleMode::Linear),
                240 => col.upsample = Some(UpsampleMode::Pad),
                _ => {}
            }
        }
    }
    manifest
}

pub fn generate_fixture(n_rows: usize, start: Timestamp, seed: u64) -> Result<(TimeTable, GroundTruth, Manifest)> {
    let spec = fixture_spec(n_rows, start, seed);
    let (table, truth) = synth_generate(&spec)?;
    Ok((table, truth, synth_manifest(&spec, true)))
}
