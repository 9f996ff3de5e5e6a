#![allow(dead_code)]

pub mod oracle;

use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use teachlab::analysis::{
    compute_condition_stats, feedback_pools, generate_synthetic_logs, permutation_test, permute_pools, replay_recorded_trajectories,
    SynthConfig, SyntheticTeacher,
};
use teachlab::error::RealizeError;
use teachlab::learner::{as2_as_qlearner, ScheduledQLearner};
use teachlab::optimal::{
    monte_carlo_td, order_equivalent, realize_reward, reference_learners, solve_value_iteration, teaching_dimension, verify_equivalence,
    PreferenceProfile, RankAction, RealizedTeacherPolicy, Relation, SolverConfig, ValueTable, WeakOrder, DEFAULT_MARGIN,
};
use teachlab::rng::{seeded, RandomSource};
use teachlab::session::{FeedbackRequest, LearnerCondition, Phase, SessionConfig, SessionStore};
use teachlab::{
    dog_env, replay, ActionId, EpisodeConfig, Experience, LearnerSpec, LearnerState, QTable, StateId, TeacherObservation, TeachingGoal,
    VisitCounts,
};

use oracle::{Expectimax, Pref, Prefs};

pub type Check = Result<String, String>;

pub fn solved(epsilon: f64) -> Arc<ValueTable> {
    Arc::new(solve_value_iteration(&dog_env(), &TeachingGoal::dog(), SolverConfig { epsilon, ..Default::default() }).unwrap())
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// ---------------------------------------------------------------- solver

pub fn check_teaching_dimension() -> Check {
    let start = Instant::now();
    let vt = solved(0.1);
    let td = teaching_dimension(&vt, &dog_env());
    let elapsed = start.elapsed();
    let detail = format!("TD = {td:.4} in {elapsed:?} (target band [10.5, 11.5], < 1 s)");
    if (10.5..=11.5).contains(&td) && elapsed.as_secs_f64() < 1.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn to_prefs(p: &PreferenceProfile) -> Prefs {
    let mut out = [Pref::Tie; 4];
    for (i, o) in out.iter_mut().enumerate() {
        *o = match p.relation(StateId(i)).unwrap() {
            Relation::FirstStrict => Pref::Left,
            Relation::SecondStrict => Pref::Right,
            Relation::Tie => Pref::Tie,
        };
    }
    out
}

/// Compare solver values to horizon-60 expectimax at `n` random abstract states.
pub fn check_expectimax(epsilon: f64, n: usize, seed: u64) -> Check {
    let vt = solved(epsilon);
    let mut oracle = Expectimax::new(epsilon);
    let mut rng = seeded(seed);
    let mut worst = 0.0_f64;
    for _ in 0..n {
        let idx = rng.random_range(0..vt.mdp().len());
        let (pos, profile) = vt.mdp().decode(idx);
        let v = vt.value(pos, &profile).unwrap();
        let o = oracle.value(60, pos.0, to_prefs(&profile));
        worst = worst.max((v - o).abs());
    }
    let start = oracle.value(60, 3, [Pref::Tie; 4]);
    let td = teaching_dimension(&vt, &dog_env());
    worst = worst.max((start - td).abs());
    let detail = format!("epsilon {epsilon}: {n} random states plus start, max |VI - expectimax| = {worst:.2e}");
    if worst <= 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- simulation

pub fn check_mc_vs_vi(n: usize, seed: u64) -> Check {
    let env = dog_env();
    let goal = TeachingGoal::dog();
    let vt = solved(0.1);
    let td = teaching_dimension(&vt, &env);
    let start = Instant::now();
    let policy = RealizedTeacherPolicy::new(vt, LearnerSpec::q(0.1, 0.9), DEFAULT_MARGIN, None).unwrap();
    let s = monte_carlo_td(&env, &goal, &policy, n, EpisodeConfig::unbounded(0.1, seed)).unwrap();
    let elapsed = start.elapsed();
    let z = (s.mean_steps - td) / s.std_err;
    let detail = format!(
        "Q(0.1, 0.9), {n} episodes: mean {:.4} +- {:.4} (se) vs VI {td:.4}, z = {z:.2}, success {}/{}, {elapsed:?}",
        s.mean_steps, s.std_err, s.n_success, s.n_episodes
    );
    if z.abs() <= 2.0 && s.n_success == n && elapsed.as_secs_f64() < 30.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

pub fn check_equivalence(n: usize, seed: u64) -> Check {
    let env = dog_env();
    let vt = solved(0.1);
    let r =
        verify_equivalence(&env, &TeachingGoal::dog(), vt, &reference_learners(), DEFAULT_MARGIN, n, EpisodeConfig::unbounded(0.1, seed))
            .unwrap();
    let means: Vec<String> = r.summaries.iter().map(|s| format!("{} {:.3}", s.learner, s.mean_steps)).collect();
    // α/γ invariance: the Q-learners' step counts agree episode by episode
    let q_same = r.summaries[..3].windows(2).all(|w| w[0].steps == w[1].steps);
    let detail = format!("{}; all overlap: {}; Q-learners identical per episode: {q_same}", means.join(", "), r.all_overlap);
    if r.all_overlap && q_same {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- update rules

fn exp(s: usize, a: ActionId, s_next: usize, reached_absorb: bool, r: f64) -> Experience {
    Experience { s: StateId(s), a, s_next: StateId(s_next), reached_absorb, r }
}

/// The worked examples for the four update rules.
pub fn check_update_examples() -> Check {
    let env = dog_env();
    let mut fails = Vec::new();
    let mut expect = |what: &str, got: f64, want: f64| {
        if !close(got, want, 1e-9) {
            fails.push(format!("{what}: {got} != {want}"));
        }
    };
    let mut l = LearnerState::new(LearnerSpec::q(0.9, 0.9), &env).unwrap();
    l.update(&exp(3, ActionId::RIGHT, 3, true, 1.0)).unwrap();
    expect("Q(0.9,0.9) into door", l.q.get(StateId(3), ActionId::RIGHT), 0.9);

    let mut l = LearnerState::new(LearnerSpec::q(0.1, 0.9), &env).unwrap();
    l.update(&exp(2, ActionId::LEFT, 1, false, -1.0)).unwrap();
    expect("Q(0.1,0.9) punish", l.q.get(StateId(2), ActionId::LEFT), -0.1);

    let mut l = LearnerState::new(LearnerSpec::q(0.9, 0.9), &env).unwrap();
    l.q.set(StateId(1), ActionId::LEFT, 0.5);
    l.update(&exp(2, ActionId::LEFT, 1, false, 0.0)).unwrap();
    expect("Q(0.9,0.9) bootstrap", l.q.get(StateId(2), ActionId::LEFT), 0.9 * 0.9 * 0.5);

    let mut l = LearnerState::new(LearnerSpec::As1 { kappa: 1.0 }, &env).unwrap();
    l.update(&exp(0, ActionId::RIGHT, 1, false, 1.0)).unwrap();
    let e = std::f64::consts::E;
    expect("AS1 belief", l.as1_belief(StateId(0)).unwrap()[1], e / (1.0 + e));
    let before = l.as1_belief(StateId(0)).unwrap();
    l.update(&exp(0, ActionId::LEFT, 0, false, 0.0)).unwrap();
    expect("AS1 r = 0", l.as1_belief(StateId(0)).unwrap()[0], before[0]);

    let mut l = LearnerState::new(LearnerSpec::As1 { kappa: 2.0 }, &env).unwrap();
    l.update(&exp(1, ActionId::RIGHT, 2, false, -0.5)).unwrap();
    expect("AS1 kappa 2", l.q.get(StateId(1), ActionId::RIGHT), -1.0);

    let l = LearnerState::with_table(LearnerSpec::As1 { kappa: 1.0 }, QTable::from_rows(vec![vec![1.0, 0.0]; 4]).unwrap()).unwrap();
    expect("AS1 softmax (1, 0)", l.as1_belief(StateId(2)).unwrap()[0], e / (1.0 + e));

    let mut l = LearnerState::new(LearnerSpec::As2, &env).unwrap();
    l.update(&exp(2, ActionId::RIGHT, 3, false, 0.7)).unwrap();
    expect("AS2 first", l.q.get(StateId(2), ActionId::RIGHT), 0.7);
    l.update(&exp(2, ActionId::RIGHT, 3, false, -0.1)).unwrap();
    expect("AS2 second", l.q.get(StateId(2), ActionId::RIGHT), 0.3);

    if fails.is_empty() {
        Ok("Q, AS1 and AS2 worked examples hold at 1e-9".into())
    } else {
        Err(fails.join("; "))
    }
}

fn random_experience(rng: &mut RandomSource) -> Experience {
    let s = rng.random_range(0..4);
    let a = ActionId(rng.random_range(0..2));
    exp(s, a, rng.random_range(0..4), rng.random_bool(0.1), rng.random_range(-1.0..1.0))
}

/// Greedy sets never depend on κ.
pub fn check_as1_kappa_invariance(streams: usize, len: usize, seed: u64) -> Check {
    let env = dog_env();
    let mut rng = seeded(seed);
    for i in 0..streams {
        let kappa = 10f64.powf(rng.random_range(-2.0..2.0));
        let mut a = LearnerState::new(LearnerSpec::As1 { kappa: 1.0 }, &env).unwrap();
        let mut b = LearnerState::new(LearnerSpec::As1 { kappa }, &env).unwrap();
        for _ in 0..len {
            let e = random_experience(&mut rng);
            a.update(&e).unwrap();
            b.update(&e).unwrap();
            for s in env.states() {
                if a.q.greedy_actions(s) != b.q.greedy_actions(s) {
                    return Err(format!("stream {i}: kappa {kappa} changes the greedy set at {s}"));
                }
                let belief = b.as1_belief(s).unwrap();
                if !close(belief.iter().sum::<f64>(), 1.0, 1e-12) {
                    return Err(format!("stream {i}: belief at {s} does not sum to 1"));
                }
            }
        }
    }
    Ok(format!("{streams} streams of {len} updates, kappa in [0.01, 100]"))
}

/// AS2 against the arithmetic mean and against Q-learning with γ = 0 and α = 1/n.
pub fn check_as2_forms(streams: usize, len: usize, seed: u64) -> Check {
    let env = dog_env();
    let mut rng = seeded(seed);
    let sched: ScheduledQLearner = as2_as_qlearner();
    let mut worst = 0.0_f64;
    for _ in 0..streams {
        let mut l = LearnerState::new(LearnerSpec::As2, &env).unwrap();
        let mut q = QTable::for_env(&env);
        let mut visits = VisitCounts::zeros(4, 2);
        let mut sums = vec![vec![(0.0, 0usize); 2]; 4];
        for _ in 0..len {
            let e = random_experience(&mut rng);
            l.update(&e).unwrap();
            sched.update(&mut q, &mut visits, &e).unwrap();
            let cell = &mut sums[e.s.0][e.a.0];
            cell.0 += e.r;
            cell.1 += 1;
        }
        for (s, row) in sums.iter().enumerate() {
            for (a, &(sum, n)) in row.iter().enumerate() {
                let mean = if n == 0 { 0.0 } else { sum / n as f64 };
                let got = l.q.get(StateId(s), ActionId(a));
                worst = worst.max((got - mean).abs()).max((got - q.get(StateId(s), ActionId(a))).abs());
            }
        }
    }
    let detail = format!("{streams} streams of {len} rewards over all 8 pairs, max deviation {worst:.1e}");
    if worst <= 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- order equivalence

pub fn random_spec(rng: &mut RandomSource) -> LearnerSpec {
    match rng.random_range(0..3) {
        0 => LearnerSpec::q(rng.random_range(0.01..=1.0), rng.random_range(0.0..0.99)),
        1 => LearnerSpec::As1 { kappa: 10f64.powf(rng.random_range(-2.0..2.0)) },
        _ => LearnerSpec::As2,
    }
}

/// Random table on a coarse grid, so ties are common.
pub fn random_table(rng: &mut RandomSource) -> QTable {
    QTable::from_rows((0..4).map(|_| (0..2).map(|_| rng.random_range(-3..=3) as f64 * 0.25).collect()).collect()).unwrap()
}

/// A table with the same per-state ordering: each row goes through its own
/// random strictly increasing map.
pub fn reorder_preserving(q: &QTable, rng: &mut RandomSource) -> QTable {
    let rows = (0..q.n_states())
        .map(|s| {
            let row = q.row(StateId(s));
            let scale = rng.random_range(0.1..5.0);
            let shift = rng.random_range(-2.0..2.0);
            row.iter().map(|v| v * scale + shift).collect()
        })
        .collect();
    QTable::from_rows(rows).unwrap()
}

pub fn random_visits(rng: &mut RandomSource) -> VisitCounts {
    let rows: Vec<Vec<u64>> = (0..4).map(|_| (0..2).map(|_| rng.random_range(0..20)).collect()).collect();
    serde_json::from_value(serde_json::to_value(rows).unwrap()).unwrap()
}

/// One draw of the order-equivalence property. `Ok(false)` when the chosen
/// placement is an exact tie that one of the learners cannot land on in
/// binary floating point (there is then no matched pair to compare).
pub fn matched_update_draw(rng: &mut RandomSource) -> Result<bool, String> {
    let env = dog_env();
    let q1 = random_table(rng);
    let q2 = reorder_preserving(&q1, rng);
    assert!(order_equivalent(&q1, &q2));
    let (spec1, spec2) = (random_spec(rng), random_spec(rng));
    let s = StateId(rng.random_range(0..4));
    let a = ActionId(rng.random_range(0..2));
    let step = env.successors(s, a)[0].0;
    let choice = RankAction(rng.random_range(0..3));
    let obs = |q: &QTable, visits: VisitCounts| TeacherObservation {
        step_index: 0,
        s,
        a,
        explored: false,
        s_next: step.next_state,
        reached_absorb: step.reached_absorb,
        q_snapshot: q.clone(),
        visits,
    };
    let o1 = obs(&q1, random_visits(rng));
    let o2 = obs(&q2, random_visits(rng));
    let after = |spec: LearnerSpec, o: &TeacherObservation| -> Result<Option<QTable>, String> {
        let r = match realize_reward(spec, o, choice, DEFAULT_MARGIN, None) {
            Ok(r) => r,
            Err(RealizeError::Unreachable) if choice.is_tie() => return Ok(None),
            Err(e) => return Err(format!("{spec}: {e} (row {:?}, taken {a}, choice {choice})", o.q_snapshot.row(s))),
        };
        let mut l = LearnerState { spec, q: o.q_snapshot.clone(), visits: o.visits.clone() };
        l.update(&o.experience(r)).unwrap();
        Ok(Some(l.q))
    };
    let (Some(n1), Some(n2)) = (after(spec1, &o1)?, after(spec2, &o2)?) else {
        return Ok(false);
    };
    if !order_equivalent(&n1, &n2) {
        return Err(format!("{spec1} vs {spec2} at {s} {a} choice {choice}: {n1:?} vs {n2:?}"));
    }
    let want = WeakOrder::of_row(q1.row(s)).place(a, choice).unwrap();
    if WeakOrder::of_row(n1.row(s)) != want {
        return Err(format!("{spec1}: placement {choice} not realized at {s}"));
    }
    Ok(true)
}

/// Run draws until `compared` matched pairs have been checked.
pub fn check_matched_updates(compared: usize, seed: u64) -> Check {
    let mut rng = seeded(seed);
    let mut done = 0;
    let mut ties_skipped = 0;
    while done < compared {
        match matched_update_draw(&mut rng) {
            Ok(true) => done += 1,
            Ok(false) => ties_skipped += 1,
            Err(e) => return Err(format!("draw {}: {e}", done + ties_skipped)),
        }
    }
    Ok(format!(
        "{compared} matched (table, experience, placement, learner pair) updates stay order-equivalent; \
         {ties_skipped} exact-tie placements had no representable reward and were redrawn"
    ))
}

// ---------------------------------------------------------------- analysis

pub fn check_permutation_machinery(seed: u64) -> Check {
    let env = dog_env();
    let mut notes = Vec::new();
    for (spec, teacher) in [
        (LearnerSpec::q(0.9, 0.0), SyntheticTeacher::Optimal),
        (LearnerSpec::As2, SyntheticTeacher::Noisy { p_flip: 0.3 }),
        (LearnerSpec::q(0.9, 0.45), SyntheticTeacher::Random),
    ] {
        let recs = generate_synthetic_logs(&env, spec, teacher, 9, seed, &SynthConfig::default()).map_err(|e| e.to_string())?;
        for p in &recs {
            let pools = feedback_pools(p);
            let outcomes = replay_recorded_trajectories(p, pools.clone()).map_err(|e| e.to_string())?;
            let recorded: Vec<_> = p.logs.iter().map(|l| l.outcome).collect();
            if outcomes != recorded {
                return Err(format!("{}: identity replay {outcomes:?} != recorded {recorded:?}", p.participant_id));
            }
            let mut rng = seeded(seed);
            for _ in 0..50 {
                let perm = permute_pools(&pools, &mut rng);
                for (k, v) in &pools {
                    let mut a: Vec<_> = v.iter().map(|f| (f.value.to_bits(), f.is_do_nothing)).collect();
                    let mut b: Vec<_> = perm[k].iter().map(|f| (f.value.to_bits(), f.is_do_nothing)).collect();
                    a.sort_unstable();
                    b.sort_unstable();
                    if a != b {
                        return Err(format!("{}: pool {k:?} changed under permutation", p.participant_id));
                    }
                }
            }
        }
        let r1 = permutation_test(&recs[0], 200, seed).map_err(|e| e.to_string())?;
        let r2 = permutation_test(&recs[0], 200, seed).map_err(|e| e.to_string())?;
        if r1 != r2 {
            return Err("same seed gave different permutation results".into());
        }
        notes.push(format!("{spec}: {}/200", r1.n_target_reached));
    }
    Ok(format!("identity replay exact, pools preserved, seeded runs identical ({})", notes.join(", ")))
}

fn success_steps(recs: &[teachlab::analysis::ParticipantRecord]) -> Vec<Option<usize>> {
    recs.iter().flat_map(|r| &r.logs).map(|l| l.outcome.and_then(|o| o.steps_used())).collect()
}

/// Exact probability that the Wilson interval from `n` Bernoulli(`p`) draws
/// contains `p`.
pub fn wilson_coverage(p: f64, n: usize) -> f64 {
    use statrs::distribution::{Binomial, Discrete};
    let b = Binomial::new(p, n as u64).unwrap();
    (0..=n)
        .filter(|&k| {
            let (lo, hi) = teachlab::analysis::wilson_interval(k, n);
            lo <= p && p <= hi
        })
        .map(|k| b.pmf(k as u64))
        .sum()
}

/// The optimal synthetic teacher clears 99% within the step cap, and the
/// stats table's 95% intervals cover the generator's ground truth (measured
/// from 20000 separately seeded dogs) over `replicates` independent batches
/// of `n_dogs`: rate coverage within 3 standard errors of the Wilson
/// interval's exact coverage at the true rate, step coverage at least 90%.
pub fn check_synthetic_pipeline(n_dogs: usize, replicates: usize, seed: u64) -> Check {
    let env = dog_env();
    let cfg = SynthConfig::default();
    let mut notes = Vec::new();
    let mut ok = true;

    let headline =
        generate_synthetic_logs(&env, LearnerSpec::q(0.9, 0.0), SyntheticTeacher::Optimal, 300, seed, &cfg).map_err(|e| e.to_string())?;
    let row = compute_condition_stats(&headline).rows[0].clone();
    ok &= row.success_rate >= 0.99;
    notes.push(format!("optimal Q0, 300 dogs: success {:.1}%", 100.0 * row.success_rate));

    for (spec, teacher) in
        [(LearnerSpec::q(0.9, 0.0), SyntheticTeacher::Optimal), (LearnerSpec::As1 { kappa: 1.0 }, SyntheticTeacher::Noisy { p_flip: 0.5 })]
    {
        let truth_recs = generate_synthetic_logs(&env, spec, teacher, 20_000, seed ^ 0xFFFF, &cfg).map_err(|e| e.to_string())?;
        let truth = teachlab::optimal::MonteCarloSummary::from_outcomes(spec, success_steps(&truth_recs), 0.0);
        let (mut rate_hits, mut steps_hits) = (0, 0);
        for k in 0..replicates {
            let recs = generate_synthetic_logs(&env, spec, teacher, n_dogs, seed + 1 + k as u64, &cfg).map_err(|e| e.to_string())?;
            let row = compute_condition_stats(&recs).rows[0].clone();
            rate_hits += usize::from(row.success_ci.0 <= truth.success_rate && truth.success_rate <= row.success_ci.1);
            if let Some((lo, hi)) = row.avg_steps_ci {
                steps_hits += usize::from(lo <= truth.mean_steps && truth.mean_steps <= hi);
            }
        }
        let (rc, sc) = (rate_hits as f64 / replicates as f64, steps_hits as f64 / replicates as f64);
        let expected = wilson_coverage(truth.success_rate, n_dogs);
        let se = (expected * (1.0 - expected) / replicates as f64).sqrt().max(1.0 / replicates as f64);
        ok &= (rc - expected).abs() <= 3.0 * se && sc >= 0.9;
        notes.push(format!(
            "{spec} {teacher:?}: truth rate {:.4}, steps {:.3}; coverage over {replicates} x {n_dogs} dogs: rate {rc:.3} (exact Wilson {expected:.3}), steps {sc:.3}",
            truth.success_rate, truth.mean_steps
        ));
    }
    let detail = notes.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- service

fn slider_grid() -> impl Iterator<Item = f64> {
    (0..=200).map(|i| -1.0 + i as f64 * 0.01)
}

/// For each grid value: open a session with the same seed, preview, submit,
/// and compare the committed scanner to the preview bit for bit.
pub fn check_preview_commit(seed: u64) -> Check {
    let store = SessionStore::in_memory();
    for condition in LearnerCondition::ALL {
        for v in slider_grid() {
            let st = store.create_session(SessionConfig::new(condition, true, seed)).map_err(|e| e.to_string())?;
            // advance a few steps so the table is not all zeros
            for k in 0..3 {
                store.submit_feedback(&st.session_id, FeedbackRequest::value(0.3 - 0.2 * k as f64)).map_err(|e| e.to_string())?;
            }
            let preview = store.preview_feedback(&st.session_id, v).map_err(|e| e.to_string())?;
            let committed = store.submit_feedback(&st.session_id, FeedbackRequest::value(v)).map_err(|e| e.to_string())?;
            let a = serde_json::to_string(&preview).unwrap();
            let b = serde_json::to_string(&committed.display).unwrap();
            if a != b || preview != committed.display {
                return Err(format!("{condition} at {v}: preview and commit differ"));
            }
        }
    }
    Ok("201 slider values x 6 conditions: committed scanner equals preview".into())
}

/// Fraction of exploratory moves over `n` moves driven by do-nothing feedback.
pub fn squirrel_rate(n: usize, seed: u64) -> (f64, f64) {
    let store = SessionStore::in_memory();
    let mut explored = 0usize;
    let mut seen = 0usize;
    let mut session = 0u64;
    while seen < n {
        let st = store.create_session(SessionConfig::new(LearnerCondition::Q45, false, seed.wrapping_add(session))).unwrap();
        session += 1;
        let mut cur = st;
        while cur.phase != Phase::SessionFinished && seen < n {
            explored += usize::from(cur.pending.as_ref().unwrap().squirrel);
            seen += 1;
            cur = store.submit_feedback(&cur.session_id, FeedbackRequest::do_nothing()).unwrap();
        }
    }
    let p = explored as f64 / n as f64;
    (p, (0.1 * 0.9 / n as f64).sqrt())
}

/// Drive sessions with realized optimal feedback (and some do-nothing
/// sessions) and check every exported log replays.
pub fn check_export_replay(seed: u64) -> Check {
    let vt = solved(0.1);
    let store = SessionStore::in_memory();
    let mut exported = 0;
    for (i, condition) in LearnerCondition::ALL.into_iter().enumerate() {
        let policy = RealizedTeacherPolicy::new(vt.clone(), condition.spec(), teachlab::analysis::SYNTH_MARGIN, Some(1.0)).unwrap();
        let st = store.create_session(SessionConfig::new(condition, i % 2 == 0, seed + i as u64)).map_err(|e| e.to_string())?;
        let mut cur = st;
        while cur.phase != Phase::SessionFinished {
            let obs = &cur.pending.as_ref().unwrap().observation;
            let fb = policy.optimal_feedback(obs).map_err(|e| e.to_string())?;
            let req = if fb.is_do_nothing { FeedbackRequest::do_nothing() } else { FeedbackRequest::value(fb.value) };
            cur = store.submit_feedback(&cur.session_id, req).map_err(|e| e.to_string())?;
        }
        let logs = store.export_session(&cur.session_id).map_err(|e| e.to_string())?;
        if logs.len() != 3 {
            return Err(format!("{condition}: exported {} logs", logs.len()));
        }
        for l in &logs {
            replay(l).map_err(|e| format!("{condition}: {e}"))?;
            if !l.outcome.is_some_and(|o| o.is_success()) {
                return Err(format!("{condition}: optimal feedback did not finish a dog"));
            }
            exported += 1;
        }
    }
    Ok(format!("{exported} exported dogs taught through the session API replay cleanly"))
}
