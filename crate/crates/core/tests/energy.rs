mod common;

use common::*;
use proptest::prelude::*;
use rowclone_core::config::SimConfig;
use rowclone_core::controller::{schedule, BulkRequest, CommandCounts, Features, SchedulingPolicy};
use rowclone_core::energy::{account, energy_ratio, EnergyLedger, PowerParams};
use rowclone_core::Time;

fn params() -> PowerParams {
    SimConfig::default().power
}

fn energy_of(features: Features, req: BulkRequest) -> f64 {
    let (timeline, _) = schedule(
        default_map(),
        ddr3_1066(),
        features,
        SchedulingPolicy::Fifo,
        [req],
    )
    .unwrap();
    account(&timeline, &params()).total
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn frozen_operation_energies() {
    let m = default_map();
    let (a, b, c) = (row(&m, 1, 2, 3), row(&m, 1, 2, 9), row(&m, 6, 2, 9));
    let z = Time::ZERO;
    let cases = [
        (Features::ROWCLONE, BulkRequest::copy(a, b, 4096, z), 39.0),
        (Features::BASELINE, BulkRequest::copy(a, b, 4096, z), 2906.4),
        (Features::ROWCLONE, BulkRequest::zero(b, 4096, z), 39.0),
        (Features::BASELINE, BulkRequest::zero(b, 4096, z), 1626.0),
        (Features::ROWCLONE, BulkRequest::copy(a, c, 4096, z), 909.6),
        (Features::BASELINE, BulkRequest::copy(a, c, 4096, z), 2906.4),
    ];
    for (f, req, expect) in cases {
        let e = energy_of(f, req.clone());
        assert!(close(e, expect), "{req:?} {f:?}: {e} != {expect}");
    }
}

#[test]
fn io_share_of_a_read_stream() {
    let m = default_map();
    let reqs: Vec<_> = (0..64)
        .map(|k| BulkRequest::read(row(&m, k % 8, k / 8, 0), Time::ZERO))
        .collect();
    let (timeline, stats) = schedule(
        m,
        ddr3_1066(),
        Features::BASELINE,
        SchedulingPolicy::Fifo,
        reqs,
    )
    .unwrap();
    let e = account(&timeline, &params());
    let c = stats.commands;
    assert_eq!((c.act, c.rd), (64, 64));
    assert!(close(e.io_energy, 64.0 * 15.6));
    assert!(close(
        e.total,
        13.0 * (c.act + c.pre) as f64 + 64.0 * (4.0 + 15.6)
    ));
}

#[test]
fn background_energy_uses_duration() {
    let p = PowerParams {
        p_background: 100.0,
        ..params()
    };
    let e = EnergyLedger::from_counts(&CommandCounts::default(), Time::from_ns(1000.0), &p);
    assert!(close(e.background_energy, 100.0));
    assert!(close(e.total, 100.0));
}

#[test]
fn ratio_rejects_empty_ledgers() {
    let zero = EnergyLedger::default();
    let one = EnergyLedger::from_counts(
        &CommandCounts {
            act: 1,
            pre: 1,
            ..Default::default()
        },
        Time::ZERO,
        &params(),
    );
    assert!(energy_ratio(&one, &zero).is_err());
    assert!(energy_ratio(&zero, &one).is_err());
    assert!(close(energy_ratio(&one, &one).unwrap(), 1.0));
}

fn counts() -> impl Strategy<Value = CommandCounts> {
    (0u64..1000, 0u64..1000, 0u64..1000, 0u64..1000, 0u64..1000).prop_map(
        |(act, pre, rd, wr, transfer)| CommandCounts {
            act,
            pre,
            rd,
            wr,
            transfer,
        },
    )
}

fn sum(a: &CommandCounts, b: &CommandCounts) -> CommandCounts {
    CommandCounts {
        act: a.act + b.act,
        pre: a.pre + b.pre,
        rd: a.rd + b.rd,
        wr: a.wr + b.wr,
        transfer: a.transfer + b.transfer,
    }
}

proptest! {
    #[test]
    fn energy_is_additive(a in counts(), b in counts(), da in 0.0f64..1e6, db in 0.0f64..1e6) {
        let p = PowerParams { p_background: 50.0, ..params() };
        let (ta, tb) = (Time::from_ns(da), Time::from_ns(db));
        let whole = EnergyLedger::from_counts(&sum(&a, &b), ta + tb, &p);
        let parts = EnergyLedger::from_counts(&a, ta, &p) + EnergyLedger::from_counts(&b, tb, &p);
        prop_assert!(close(whole.total, parts.total));
        prop_assert!(close(whole.io_energy, parts.io_energy));
    }

    #[test]
    fn energy_is_monotone(a in counts(), b in counts()) {
        let p = params();
        let base = EnergyLedger::from_counts(&a, Time::ZERO, &p);
        let more = EnergyLedger::from_counts(&sum(&a, &b), Time::ZERO, &p);
        prop_assert!(more.total >= base.total);
    }

    #[test]
    fn energy_scales_with_parameters(a in counts(), k in 0.0f64..100.0) {
        let p = params();
        let e = EnergyLedger::from_counts(&a, Time::from_ns(10.0), &p);
        let s = EnergyLedger::from_counts(&a, Time::from_ns(10.0), &p.scaled(k));
        prop_assert!(close(s.total, e.total * k));
    }

    #[test]
    fn components_sum_to_total(a in counts()) {
        let e = EnergyLedger::from_counts(&a, Time::from_ns(5.0), &params());
        let parts = e.act_pre_energy + e.array_rw_energy + e.io_energy + e.transfer_energy + e.background_energy;
        prop_assert!(close(parts, e.total));
    }
}
