//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured numbers. Run with
//! `cargo test --test acceptance -- --nocapture`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use webloop::action::{normalize_action, parse_action, render_action, Action};
use webloop::distill::{
    acceptance_rate, export_multitask, run_speculative_episode, speculative_step,
    CandidateProposer, DistillError, Proposer, TaskKind,
};
use webloop::env::WebEnv;
use webloop::harness::{init_state, run_iteration, synergy, HarnessConfig, LoopBackends};
use webloop::knowledge::{
    embed, retrieve_by_match, retrieve_by_similarity, retrieve_by_summary, retrieve_mixed,
    EntrySource, KnowledgeStore, RetrievalQuery,
};
use webloop::privacy::{detect_rules, run_hybrid_episode, Detector};
use webloop::ragagent::EpisodeConfig;
use webloop::sim::fixtures::{builtin_site, builtin_suite};
use webloop::sim::{
    evaluate, reset, run_student_episode, teacher_predict, train_student, BernoulliStudent,
    OracleSession, OracleTeacher, SimSite, SimTask, StudentConfig,
};
use webloop::trajectory::{Observation, Trajectory};

// ---------------------------------------------------------------------------
// helpers
// ---------------------------------------------------------------------------

const WORDS: &[&str] = &[
    "wish", "list", "order", "refund", "account", "email", "price", "issue", "merge", "ticket",
    "route", "layer", "archive", "forum", "post", "search", "submit", "catalog", "voucher",
    "banner", "history", "report", "review", "profile", "market", "lamp", "strap", "tires",
];

fn word_soup(rng: &mut ChaCha8Rng, min: usize, max: usize) -> String {
    let n = rng.random_range(min..=max);
    (0..n)
        .map(|_| WORDS[rng.random_range(0..WORDS.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

fn arbitrary_text(rng: &mut ChaCha8Rng) -> String {
    // Printable ASCII including brackets and `] [` runs; fields are stored
    // trimmed, so generate trimmed text.
    let n = rng.random_range(0..40);
    let mut out = String::new();
    for _ in 0..n {
        let c = match rng.random_range(0..10u32) {
            0 => '[',
            1 => ']',
            2 => ' ',
            _ => char::from(rng.random_range(33u8..=126)),
        };
        out.push(c);
    }
    out.trim().to_string()
}

fn random_action(rng: &mut ChaCha8Rng) -> Action {
    match rng.random_range(0..7u32) {
        0 => Action::Click { element_id: rng.random_range(0..100_000) },
        1 => Action::GoBack,
        2 => Action::Stop { answer: arbitrary_text(rng) },
        3 => Action::Note { content: arbitrary_text(rng) },
        4 => Action::Type {
            element_id: rng.random_range(0..100_000),
            content: arbitrary_text(rng),
            press_enter: rng.random_bool(0.5),
        },
        5 => Action::Branch {
            parent_plan_id: rng.random_range(0..1000),
            intent: arbitrary_text(rng),
        },
        _ => Action::Prune {
            resume_plan_id: rng.random_range(0..1000),
            reason: arbitrary_text(rng),
        },
    }
}

fn random_trajectory(rng: &mut ChaCha8Rng, observations: usize) -> Trajectory {
    let mut t = Trajectory::new("t", word_soup(rng, 2, 5), "test://site/start");
    for i in 0..observations {
        t.push_observation(
            format!("page {i} {}", word_soup(rng, 1, 6)),
            format!("test://site/p{i}"),
        )
        .unwrap();
        if i + 1 < observations {
            // Sometimes several actions between observations.
            for _ in 0..rng.random_range(1..=2) {
                t.push_action(random_action(rng), Some(word_soup(rng, 1, 4))).unwrap();
            }
        }
    }
    t
}

// ---------------------------------------------------------------------------
// 1. Parser round-trip
// ---------------------------------------------------------------------------

#[test]
fn acceptance_parser_round_trip() {
    let started = std::time::Instant::now();
    // Every action string appearing in the reference appendices.
    let reference = [
        "click [7]",
        "go_back",
        "stop [N/A ...]",
        "stop [ABC_123]",
        "stop [The token is ABC_123]",
        "stop [N/A no product found]",
        "note [Spent $10 on 4/1/2024]",
        "type [15] [Carnegie Mellon University] [1]",
        "branch [12] [Navigate to the \"Issue\" page to check all the issues.]",
        "prune [5] [The current page lacks items \"black speaker,\" prompting a return to the initial page to restart the item search.]",
        "click [1983]",
        "type [5509] [I am writing to request a refund for a phone screen protector I recently purchased. The product broke after just three days of use. My order number is #000000180. Unfortunately, I don't have the product SKU at hand, but it should be associated with this order number. I would greatly appreciate your assistance in processing this refund. Thank you for your help.] [0]",
        "stop [The 'Contact Us' form has been filled out with the required information for a refund request on the phone screen protector. The message includes the order number #000000180 and explains that the product SKU is not available but should be associated with the order number. The form is ready for review but has not been submitted as per the instructions.]",
        "click [4606]",
        "stop [Added DkRgVNY Lace Spcling Lingerie Womens Sexy Hollow Out Underwear Bodysuit One Piece Snap Crotch Clubwear Teddy Bodysuit to my wish list]",
        "click [1673]",
        "type [4597] [HONGJ Hawaiian Beach Outfits Set for Mens] [1]",
        "click [6728]",
        "stop [The HONGJ Hawaiian Beach Outfits Set for Mens has been successfully added to the Wish List. The task is complete.]",
    ];
    for text in reference {
        let action = parse_action(text).unwrap_or_else(|e| panic!("`{text}`: {e}"));
        let round = parse_action(&render_action(&action)).unwrap();
        assert_eq!(round, action, "`{text}`");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xac7);
    let corpus: Vec<Action> = (0..200).map(|_| random_action(&mut rng)).collect();
    for action in &corpus {
        let rendered = render_action(action);
        let parsed = parse_action(&rendered).unwrap_or_else(|e| panic!("`{rendered}`: {e}"));
        assert_eq!(&parsed, action, "`{rendered}`");
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "PASS parser round-trip: {} reference + 200 generated actions in {elapsed:?}",
        reference.len()
    );
}

// ---------------------------------------------------------------------------
// 2. Subsequence law
// ---------------------------------------------------------------------------

#[test]
fn acceptance_subsequence_law() {
    let started = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eb5);
    for round in 0..60 {
        let n = rng.random_range(2..=8usize);
        let trajectory = random_trajectory(&mut rng, n);
        let subs = webloop::trajectory::split_subsequences(&trajectory).unwrap();
        // Independent brute-force pair enumerator.
        let positions: Vec<usize> = trajectory
            .steps()
            .iter()
            .enumerate()
            .filter(|(_, s)| s.observation.is_some())
            .map(|(i, _)| i)
            .collect();
        let mut expected = 0;
        for i in 0..positions.len() {
            for _j in i + 1..positions.len() {
                expected += 1;
            }
        }
        assert_eq!(expected, n * (n - 1) / 2);
        assert_eq!(subs.len(), expected, "round {round}, n={n}");
        for sub in &subs {
            assert!(sub.steps().first().unwrap().observation.is_some());
            assert!(sub.steps().last().unwrap().observation.is_some());
            sub.check_invariants().unwrap();
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("PASS subsequence law: 60 random trajectories, n in [2,8], in {elapsed:?}");
}

// ---------------------------------------------------------------------------
// 3. Retrieval oracle equivalence
// ---------------------------------------------------------------------------

/// Independent full-scan ranking: cosine sort, descending, ties by id.
fn oracle_ranking(
    store: &KnowledgeStore,
    query_text: &str,
    entry_text: impl Fn(&webloop::knowledge::KnowledgeEntry) -> String,
    k: usize,
) -> Vec<u64> {
    let q = embed(query_text);
    let mut scored: Vec<(f64, u64)> = store
        .entries()
        .iter()
        .filter(|e| e.validated)
        .map(|e| (q.cosine(&embed(&entry_text(e))), e.id))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.into_iter().take(k).map(|(_, id)| id).collect()
}

#[test]
fn acceptance_retrieval_matches_brute_force() {
    let started = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x27e7);
    for round in 0..50 {
        let mut store = KnowledgeStore::new();
        for _ in 0..20 {
            let n = rng.random_range(2..=3);
            let t = random_trajectory(&mut rng, n);
            store.ingest(
                t,
                word_soup(&mut rng, 2, 5),
                word_soup(&mut rng, 2, 6),
                true,
                EntrySource::Teacher,
                0,
            );
        }
        // One never-returned entry outside the eligible set.
        store.ingest(
            random_trajectory(&mut rng, 2),
            "never retrieved",
            "never retrieved",
            false,
            EntrySource::Student,
            0,
        );
        let observation = Observation {
            content: format!("page {}", word_soup(&mut rng, 2, 6)),
            url: "test://q/page".to_string(),
            step_index: 0,
        };
        let partial = random_trajectory(&mut rng, 2);
        let query = RetrievalQuery {
            instruction: word_soup(&mut rng, 2, 5),
            observation: Some(observation.clone()),
            partial_trajectory: Some(partial.clone()),
            per_strategy_k: 5,
        };

        let got: Vec<u64> = retrieve_by_summary(&query, &store).iter().map(|e| e.id).collect();
        let want = oracle_ranking(
            &store,
            &format!("{}\n{}", query.instruction, observation.content),
            |e| e.summary.clone(),
            5,
        );
        assert_eq!(got, want, "summary strategy, round {round}");

        let got: Vec<u64> = retrieve_by_match(&query, &store).iter().map(|e| e.id).collect();
        let want = oracle_ranking(
            &store,
            &format!("{}\n{}", observation.content, query.instruction),
            |e| {
                format!(
                    "{}\n{}",
                    e.trajectory.observations().next().map(|o| o.content.clone()).unwrap_or_default(),
                    e.instruction
                )
            },
            5,
        );
        assert_eq!(got, want, "match strategy, round {round}");

        let got: Vec<u64> = retrieve_by_similarity(&query, &store).iter().map(|e| e.id).collect();
        let q = embed(&partial.render_text());
        let mut scored: Vec<(f64, u64)> = store
            .entries()
            .iter()
            .filter(|e| e.validated)
            .map(|e| (q.cosine(&e.embedding), e.id))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let want: Vec<u64> = scored.into_iter().take(5).map(|(_, id)| id).collect();
        assert_eq!(got, want, "similarity strategy, round {round}");

        // Mixture equals the union-dedup oracle over the three strategies.
        let got: Vec<u64> = retrieve_mixed(&query, &store).iter().map(|e| e.id).collect();
        let mut want: Vec<u64> = Vec::new();
        for id in retrieve_by_summary(&query, &store)
            .iter()
            .chain(retrieve_by_match(&query, &store).iter())
            .chain(retrieve_by_similarity(&query, &store).iter())
            .map(|e| e.id)
        {
            if !want.contains(&id) {
                want.push(id);
            }
        }
        want.truncate(15);
        assert_eq!(got, want, "mixed strategy, round {round}");
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    println!("PASS retrieval oracle equivalence: 50 stores x 4 rankings in {elapsed:?}");
}

// ---------------------------------------------------------------------------
// 4. Speculative semantics
// ---------------------------------------------------------------------------

struct FixedProposer(Action);

impl Proposer for FixedProposer {
    fn propose(&mut self, _i: &str, _o: &Observation) -> Result<(Action, String), DistillError> {
        Ok((self.0.clone(), "student".to_string()))
    }
}

struct FixedCandidates(Vec<Action>);

impl CandidateProposer for FixedCandidates {
    fn candidates(
        &mut self,
        _i: &str,
        _h: &Trajectory,
        _o: &Observation,
        k: usize,
    ) -> Result<Vec<(Action, String)>, DistillError> {
        Ok(self.0.iter().take(k).map(|a| (a.clone(), "teacher".to_string())).collect())
    }
}

fn teacher_only_rollout(site: &SimSite, task: &SimTask, seed: u64, max_steps: usize) -> Vec<Action> {
    let mut oracle = OracleTeacher::from_sites(std::slice::from_ref(site))
        .with_accuracy(1.0)
        .with_seed(seed);
    let mut env = reset(site, &task.id).unwrap();
    let mut actions = Vec::new();
    for _ in 0..max_steps {
        if env.terminated() {
            break;
        }
        let page = env.current_page().to_string();
        let (action, _) = teacher_predict(&mut oracle, site, &task.id, &page);
        env.apply(&action).unwrap();
        actions.push(action.clone());
        if action.is_stop() {
            break;
        }
    }
    actions
}

#[test]
fn acceptance_speculative_semantics() {
    let started = std::time::Instant::now();
    // Exhaustive truth table over candidate-set size and proposal position.
    let proposal = Action::Click { element_id: 7 };
    let fillers = [
        Action::GoBack,
        Action::Note { content: "inspect".to_string() },
        Action::Click { element_id: 9 },
    ];
    let history = Trajectory::new("speculative", "task", "test://p");
    let observation = Observation {
        content: "page [7] [9]".to_string(),
        url: "test://p".to_string(),
        step_index: 0,
    };
    let mut cases = 0;
    for k in 1..=3usize {
        for position in 0..=k {
            let mut candidates: Vec<Action> = fillers.iter().take(k).cloned().collect();
            let member = position < k;
            if member {
                candidates[position] = proposal.clone();
            }
            let outcome = speculative_step(
                &mut FixedProposer(proposal.clone()),
                &mut FixedCandidates(candidates.clone()),
                "task",
                &history,
                &observation,
                k,
            )
            .unwrap();
            assert_eq!(outcome.accepted, member, "k={k} position={position}");
            let expected_executed = if member { proposal.clone() } else { candidates[0].clone() };
            assert_eq!(outcome.executed.0, expected_executed, "k={k} position={position}");
            assert_eq!(
                outcome.accepted,
                outcome
                    .candidates
                    .iter()
                    .any(|(c, _)| normalize_action(c) == normalize_action(&outcome.proposed.0))
            );
            cases += 1;
        }
    }

    // A student whose proposals are never candidates reduces to the
    // teacher-only rollout, action for action.
    let suite = builtin_suite();
    let fixture_tasks = [
        ("shopping", "shopping-wishlist-hongj"),
        ("gitlab", "gitlab-create-issue"),
        ("map", "map-route-time"),
    ];
    for (site_name, task_id) in fixture_tasks {
        let site = suite.iter().find(|s| s.name == site_name).unwrap();
        let task = site.task(task_id).unwrap();
        let seed = 0xd15e;
        let mut rejecting_student = BernoulliStudent::new(site, task, 0.0, 1);
        let oracle = OracleTeacher::from_sites(std::slice::from_ref(site))
            .with_accuracy(1.0)
            .with_seed(seed);
        let mut teacher = OracleSession {
            oracle,
            site,
            task_id: task.id.clone(),
        };
        let mut env = reset(site, task_id).unwrap();
        let episode = run_speculative_episode(
            &mut rejecting_student,
            &mut teacher,
            &mut env,
            &task.instruction,
            3,
            12,
        )
        .unwrap();
        assert_eq!(acceptance_rate(&episode.outcomes), 0.0, "{task_id}");
        let teacher_only = teacher_only_rollout(site, task, seed, 12);
        let executed: Vec<Action> = episode.trajectory.actions().cloned().collect();
        assert_eq!(executed, teacher_only, "{task_id}");
        assert!(evaluate(&env.terminal_state(), task), "{task_id}");
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    println!(
        "PASS speculative semantics: {cases} truth-table cases + 3 total-rejection rollouts in {elapsed:?}"
    );
}

// ---------------------------------------------------------------------------
// 5. Acceptance-rate calibration
// ---------------------------------------------------------------------------

#[test]
fn acceptance_rate_calibration() {
    let started = std::time::Instant::now();
    let suite = builtin_suite();
    let site = suite.iter().find(|s| s.name == "shopping").unwrap();
    let task = site.task("shopping-wishlist-hongj").unwrap();
    let observation = Observation {
        content: site.pages["home"].content.clone(),
        url: site.page_url("home"),
        step_index: 0,
    };
    let history = Trajectory::new("speculative", &task.instruction, observation.url.clone());
    let mut rates = Vec::new();
    for (q, seed) in [(0.2, 11u64), (0.5, 12), (0.8, 13)] {
        let mut student = BernoulliStudent::new(site, task, q, seed);
        let oracle = OracleTeacher::from_sites(std::slice::from_ref(site))
            .with_accuracy(1.0)
            .with_seed(seed ^ 0xbeef);
        let mut teacher = OracleSession {
            oracle,
            site,
            task_id: task.id.clone(),
        };
        let outcomes: Vec<_> = (0..200)
            .map(|_| {
                speculative_step(&mut student, &mut teacher, &task.instruction, &history, &observation, 3)
                    .unwrap()
            })
            .collect();
        let rate = acceptance_rate(&outcomes);
        assert!(
            (rate - q).abs() <= 0.1,
            "empirical acceptance {rate} differs from q={q} by more than 0.1"
        );
        rates.push(rate);
    }
    assert!(
        rates[0] < rates[1] && rates[1] < rates[2],
        "acceptance not monotone in q: {rates:?}"
    );
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!(
        "PASS acceptance-rate calibration: q=0.2/0.5/0.8 -> {:.3}/{:.3}/{:.3} in {elapsed:?}",
        rates[0], rates[1], rates[2]
    );
}

// ---------------------------------------------------------------------------
// 6. Multi-task export parity
// ---------------------------------------------------------------------------

#[test]
fn acceptance_multitask_export_parity() {
    let started = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xe4b);
    let mut trajectories = Vec::new();
    let mut action_steps = 0;
    for _ in 0..20 {
        let n = rng.random_range(2..=5);
        let t = random_trajectory(&mut rng, n);
        action_steps += t.num_actions() as usize;
        trajectories.push(t);
    }
    let export = export_multitask(&trajectories);
    assert_eq!(export.records.len(), 2 * action_steps);
    assert_eq!(export.skew.steps_missing_reason, 0);
    let mut action_records = 0;
    for record in &export.records {
        if record.task_kind == TaskKind::Action {
            parse_action(&record.output)
                .unwrap_or_else(|e| panic!("unparseable action output `{}`: {e}", record.output));
            action_records += 1;
        }
    }
    assert_eq!(action_records, action_steps);
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "PASS multi-task export parity: {} records = 2 x {action_steps} action steps in {elapsed:?}",
        export.records.len()
    );
}

// ---------------------------------------------------------------------------
// 7. Privacy confidentiality
// ---------------------------------------------------------------------------

#[test]
fn acceptance_privacy_confidentiality() {
    let started = std::time::Instant::now();
    // The rule detector flags the classic email and phone fixtures.
    assert!(detect_rules("text 'emma.lopez@gmail.com'").found);
    assert!(detect_rules("T: 6505551212").found);
    assert!(!detect_rules("Welcome to One Stop Market").found);

    let site = builtin_site("shopping").unwrap();
    let sites = Arc::new(vec![site.clone()]);
    let cloud = webloop::sim::sim_teacher_backend(
        Arc::clone(&sites),
        1.0,
        21,
        "cloud-agent",
        webloop::gateway::Locality::Cloud,
    );
    let local = webloop::sim::sim_teacher_backend(
        Arc::clone(&sites),
        1.0,
        22,
        "local-agent",
        webloop::gateway::Locality::Local,
    );
    let config = EpisodeConfig {
        max_steps: 12,
        ..Default::default()
    };
    let mut flagged_contents: Vec<String> = Vec::new();
    let mut flagged_steps = 0;
    let mut total_steps = 0;
    for task in &site.tasks {
        let mut env = reset(&site, &task.id).unwrap();
        let (trajectory, logs) =
            run_hybrid_episode(&mut env, &task.instruction, &cloud, &local, &Detector::Rules, &config)
                .unwrap();
        let observations: Vec<&Observation> = trajectory.observations().collect();
        total_steps += logs.len();
        for log in &logs {
            // Every detector-flagged step is served locally.
            if log.verdict.found {
                flagged_steps += 1;
                assert_eq!(log.served_by, webloop::gateway::Locality::Local, "task {}", task.id);
                if let Some(obs) = observations.get(log.step_index as usize) {
                    flagged_contents.push(obs.content.clone());
                }
            }
        }
    }
    assert!(flagged_steps > 0, "the fixture must exercise flagged steps");
    // Substring audit: no flagged observation text ever reached the cloud.
    for content in &flagged_contents {
        assert!(
            !cloud.audit().any_user_content_contains(content),
            "cloud audit leaked a flagged observation"
        );
        assert!(local.audit().any_user_content_contains(content));
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    println!(
        "PASS privacy confidentiality: {flagged_steps}/{total_steps} flagged steps served locally, cloud audit clean, in {elapsed:?}"
    );
}

// ---------------------------------------------------------------------------
// 8. Synergy loop trend
// ---------------------------------------------------------------------------

#[test]
fn acceptance_synergy_loop_trend() {
    let started = std::time::Instant::now();
    let suite = Arc::new(builtin_suite());
    let config = HarnessConfig::default();
    let backends = LoopBackends::from_config(&config, &suite).unwrap();
    let mut state = init_state(&suite, &config, &backends).unwrap();
    let mut store_sizes = vec![state.store.len()];
    for _ in 0..3 {
        run_iteration(&mut state, &suite, &config, &backends).unwrap();
        store_sizes.push(state.store.len());
    }
    let deltas: Vec<f64> = state.metrics_history.iter().map(|m| m.delta).collect();
    for (i, delta) in deltas.iter().enumerate() {
        assert!(*delta >= 0.0, "delta at iteration {} is {delta}", i + 1);
    }
    assert!(
        *deltas.last().unwrap() > 0.0,
        "final delta must be strictly positive: {deltas:?}"
    );
    assert!(
        deltas.windows(2).all(|w| w[1] >= w[0] - 1e-12),
        "delta must be non-decreasing: {deltas:?}"
    );
    assert!(
        store_sizes.windows(2).all(|w| w[1] > w[0]),
        "knowledge base must strictly grow each iteration: {store_sizes:?}"
    );
    for metrics in &state.metrics_history {
        let recomputed = synergy(metrics.sr_iter, metrics.sr_teacher, metrics.sr_student);
        assert!((metrics.delta - recomputed).abs() < 1e-12);
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!(
        "PASS synergy loop trend: deltas {deltas:?}, store {store_sizes:?}, in {elapsed:?}"
    );
}

// ---------------------------------------------------------------------------
// 9. Multi-task ablation direction
// ---------------------------------------------------------------------------

#[test]
fn acceptance_multitask_ablation_direction() {
    let started = std::time::Instant::now();
    let site = builtin_site("transfer").unwrap();
    let train_task = site.task("transfer-train").unwrap();

    // One clean teacher demonstration of the training task.
    let mut teacher_run = Trajectory::new("rag", &train_task.instruction, site.page_url("start"));
    let mut env = reset(&site, &train_task.id).unwrap();
    for step in &train_task.solution {
        let observation = env.observation();
        teacher_run.push_observation(observation.content, observation.url).unwrap();
        teacher_run
            .push_action(step.action.clone(), Some(format!("demonstration step on {}", step.page)))
            .unwrap();
        env.apply(&step.action).unwrap();
    }
    teacher_run.success = Some(1.0);
    let export = export_multitask(std::slice::from_ref(&teacher_run));
    let action_only: Vec<_> = export
        .records
        .iter()
        .filter(|r| r.task_kind == TaskKind::Action)
        .cloned()
        .collect();

    let solve_count = |records: &[webloop::distill::DistillationRecord]| -> usize {
        let (student, _) = train_student(records, &StudentConfig { exploration_rate: 0.0, seed: 17 });
        site.tasks
            .iter()
            .filter(|task| {
                let mut fork = student.fork(17, 0.0);
                let mut env = reset(&site, &task.id).unwrap();
                run_student_episode(&mut env, &task.instruction, &mut fork, 12);
                evaluate(&env.terminal_state(), task)
            })
            .count()
    };

    let action_only_solved = solve_count(&action_only);
    let multitask_solved = solve_count(&export.records);
    assert!(
        multitask_solved >= action_only_solved,
        "multi-task {multitask_solved} < action-only {action_only_solved}"
    );
    // The reasoning-trained student generalizes to the held-out wording.
    assert_eq!(multitask_solved, 2, "multi-task student solves both tasks");
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "PASS multi-task ablation direction: action-only {action_only_solved}/2 <= multi-task {multitask_solved}/2 in {elapsed:?}"
    );
}

// ---------------------------------------------------------------------------
// 10. Reproducibility
// ---------------------------------------------------------------------------

#[test]
fn acceptance_reproducibility() {
    let started = std::time::Instant::now();
    let suite = Arc::new(builtin_suite());
    let config = HarnessConfig::default();
    let run = || {
        let state = webloop::harness::run_loop(&suite, &config).unwrap();
        serde_json::to_string_pretty(&state.metrics_history).unwrap()
    };
    let first = run();
    let second = run();
    assert_eq!(first, second, "metrics JSON must be byte-identical across runs");
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
    println!(
        "PASS reproducibility: two identical {}-byte metrics files in {elapsed:?}",
        first.len()
    );
}
