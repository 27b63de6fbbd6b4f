mod common;

use common::case;
use edgeplan_core::estimate::estimate_resolved;
use edgeplan_core::net::{build_cep_graph, chunkify, solve_schedule, verify_schedule};
use edgeplan_core::sim::{simulate_resolved, DynamicsTrace, SharePolicy};
use edgeplan_core::Error;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn schedules_satisfy_invariants(seed in any::<u64>(), dp in any::<bool>(), w in 1usize..12) {
        let c = case(seed, true, dp);
        let g = match build_cep_graph(&c.plan, &c.graph, &c.env, &c.workload) {
            Ok(g) => g,
            Err(e) => panic!("{e}"),
        };
        let s = solve_schedule(&g, &c.env).unwrap();
        let v = verify_schedule(&g, &c.env, &s);
        prop_assert!(v.is_empty(), "fractional: {v:?}");
        let ch = chunkify(&g, &c.env, &s, w).unwrap();
        let v = verify_schedule(&g, &c.env, &ch);
        prop_assert!(v.is_empty(), "chunked: {v:?}");
        let moving = g.comm_tasks().filter(|t| t.bytes > 0.0).count();
        prop_assert_eq!(ch.chunks.len(), moving * w);
    }

    #[test]
    fn relaxed_estimate_bounds_schedules(seed in any::<u64>(), dp in any::<bool>()) {
        let c = case(seed, true, dp);
        let est = match estimate_resolved(&c.plan, &c.graph, &c.env.relaxed(), &c.workload, 0.0) {
            Ok(e) => e,
            Err(Error::PipelineTooDeep { .. }) => return Ok(()),
            Err(e) => panic!("{e}"),
        };
        let g = build_cep_graph(&c.plan, &c.graph, &c.env, &c.workload).unwrap();
        let s = solve_schedule(&g, &c.env).unwrap();
        let tol = 1e-9 * est.t_latency.max(1.0);
        prop_assert!(est.t_latency <= s.makespan + tol);
        let ch = chunkify(&g, &c.env, &s, 8).unwrap();
        prop_assert!(est.t_latency <= ch.makespan + tol);
        let replay = simulate_resolved(&c.plan, &c.graph, &c.env, &c.workload, SharePolicy::Chunked(&ch), 1, &DynamicsTrace::empty()).unwrap();
        prop_assert!(est.t_latency <= replay.makespan + tol);
    }
}
