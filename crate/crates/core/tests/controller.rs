mod common;

use common::*;
use proptest::prelude::*;
use rowclone_core::controller::{
    schedule, BulkRequest, Features, Mechanism, SchedulingPolicy, SimStats,
};
use rowclone_core::dram::{check_commands, DramConfig};

fn one(
    map: &rowclone_core::controller::AddressMap,
    features: Features,
    req: BulkRequest,
) -> SimStats {
    let (timeline, stats) = schedule(
        map.clone(),
        ddr3_1066(),
        features,
        SchedulingPolicy::Fifo,
        [req],
    )
    .unwrap();
    let cfg = DramConfig {
        geometry: *map.geometry(),
        timing: ddr3_1066(),
        fpm_enabled: features.fpm_active(),
    };
    assert!(check_commands(&cfg, &timeline.commands()).is_empty());
    stats
}

fn latency_ns(s: &SimStats) -> f64 {
    s.requests[0].latency.as_ns()
}

#[test]
fn closed_form_latencies() {
    let m = default_map();
    let z = rowclone_core::Time::ZERO;
    let a = row(&m, 2, 3, 10);
    let b = row(&m, 2, 3, 40);
    let other_bank = row(&m, 5, 7, 11);
    let cases = [
        (
            "fpm copy",
            Features::ROWCLONE,
            BulkRequest::copy(a, b, 4096, z),
            Some(Mechanism::Fpm),
            88.125,
        ),
        (
            "baseline intra-subarray copy",
            Features::BASELINE,
            BulkRequest::copy(a, b, 4096, z),
            Some(Mechanism::BaselineCopy),
            1038.75,
        ),
        (
            "fpm zero",
            Features::ROWCLONE,
            BulkRequest::zero(b, 4096, z),
            Some(Mechanism::FpmZero),
            88.125,
        ),
        (
            "baseline zero",
            Features::BASELINE,
            BulkRequest::zero(b, 4096, z),
            Some(Mechanism::BaselineZero),
            532.5,
        ),
        (
            "psm copy",
            Features::ROWCLONE,
            BulkRequest::copy(a, other_bank, 4096, z),
            Some(Mechanism::Psm),
            528.75,
        ),
        (
            "baseline inter-bank copy",
            Features::BASELINE,
            BulkRequest::copy(a, other_bank, 4096, z),
            Some(Mechanism::BaselineCopy),
            1014.375,
        ),
        (
            "read",
            Features::ROWCLONE,
            BulkRequest::read(a, z),
            None,
            33.75,
        ),
    ];
    for (name, f, req, mech, expect) in cases {
        let s = one(&m, f, req);
        assert_eq!(s.requests[0].mechanism, mech, "{name}");
        assert_eq!(latency_ns(&s), expect, "{name}");
    }
}

#[test]
fn channel_bytes_per_mechanism() {
    let m = default_map();
    let z = rowclone_core::Time::ZERO;
    let a = row(&m, 0, 1, 1);
    let b = row(&m, 0, 1, 2);
    let c = row(&m, 3, 1, 2);
    assert_eq!(
        one(&m, Features::ROWCLONE, BulkRequest::copy(a, b, 4096, z)).channel_bytes,
        0
    );
    assert_eq!(
        one(&m, Features::ROWCLONE, BulkRequest::copy(a, c, 4096, z)).channel_bytes,
        0
    );
    assert_eq!(
        one(&m, Features::ROWCLONE, BulkRequest::zero(b, 4096, z)).channel_bytes,
        0
    );
    assert_eq!(
        one(&m, Features::BASELINE, BulkRequest::copy(a, b, 4096, z)).channel_bytes,
        8192
    );
    assert_eq!(
        one(&m, Features::BASELINE, BulkRequest::zero(b, 4096, z)).channel_bytes,
        4096
    );
}

#[test]
fn concurrent_fpm_copies_in_different_banks() {
    let m = default_map();
    let z = rowclone_core::Time::ZERO;
    let reqs = [
        BulkRequest::copy(row(&m, 0, 1, 1), row(&m, 0, 1, 2), 4096, z),
        BulkRequest::copy(row(&m, 1, 1, 1), row(&m, 1, 1, 2), 4096, z),
    ];
    let (_, s) = schedule(
        m,
        ddr3_1066(),
        Features::ROWCLONE,
        SchedulingPolicy::Fifo,
        reqs,
    )
    .unwrap();
    let ends: Vec<f64> = s.requests.iter().map(|r| r.end.as_ns()).collect();
    assert_eq!(ends, [88.125, 95.625]);
}

#[test]
fn multi_row_fpm_slope_is_bounded() {
    let m = default_map();
    let t = ddr3_1066();
    let bound = (t.t_rc + t.t_rrd).as_ns();
    let src = row(&m, 0, 4, 10);
    let dst = row(&m, 0, 4, 20);
    let mut prev = None;
    for n in [1u64, 2, 4, 8, 16, 32] {
        let s = one(
            &m,
            Features::ROWCLONE,
            BulkRequest::copy(src, dst, n * 4096, rowclone_core::Time::ZERO),
        );
        assert_eq!(s.requests[0].mechanism, Some(Mechanism::Fpm));
        let l = latency_ns(&s);
        if let Some((pn, pl)) = prev {
            let slope = (l - pl) / (n - pn) as f64;
            assert!(slope <= bound, "{n} rows: slope {slope} > {bound}");
        }
        prev = Some((n, l));
    }
}

#[test]
fn schedules_are_deterministic() {
    let m = toy_map();
    let reqs = random_requests(&m, 5, 40);
    let a = schedule(
        m.clone(),
        ddr3_1066(),
        Features::ROWCLONE,
        SchedulingPolicy::Fifo,
        reqs.clone(),
    )
    .unwrap();
    let b = schedule(
        m,
        ddr3_1066(),
        Features::ROWCLONE,
        SchedulingPolicy::Fifo,
        reqs,
    )
    .unwrap();
    assert_eq!(a.0.commands(), b.0.commands());
    assert_eq!(a.1, b.1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rowclone_preserves_memory_semantics(seed in any::<u64>(), n in 1usize..40) {
        let m = toy_map();
        let image = random_image(&m, seed);
        let reqs = random_requests(&m, seed, n);
        let (ref_image, ref_reads) = run_reference(&m, &image, &reqs);
        for f in [Features::BASELINE, Features::ROWCLONE] {
            let (img, reads, _) = run_controller(&m, f, image.clone(), &reqs);
            prop_assert_eq!(img.first_difference(&ref_image), None);
            prop_assert_eq!(&reads, &ref_reads);
        }
    }

    #[test]
    fn every_timeline_passes_the_checker(seed in any::<u64>(), n in 1usize..40, policy in prop_oneof![Just(SchedulingPolicy::Fifo), Just(SchedulingPolicy::OpenRowFirst)]) {
        let m = rowclone_core::controller::AddressMap::new(geometry(8, 4, 8, 512), Default::default()).unwrap();
        let reqs = random_requests(&m, seed, n);
        for f in [Features::BASELINE, Features::ROWCLONE] {
            let (timeline, stats) = schedule(m.clone(), ddr3_1066(), f, policy, reqs.clone()).unwrap();
            let cfg = DramConfig { geometry: *m.geometry(), timing: ddr3_1066(), fpm_enabled: f.fpm_active() };
            let v = check_commands(&cfg, &timeline.commands());
            prop_assert!(v.is_empty(), "{:?}", v.first());
            prop_assert_eq!(stats.requests.len(), n);
        }
    }
}
