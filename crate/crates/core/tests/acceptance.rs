//! One PASS/FAIL line per acceptance criterion. Run with `--nocapture` to
//! see the report.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vhsim_core::attitude::{modulate, AttitudeDistribution, ModulationTemperature};
use vhsim_core::content::{Effort, PolicyCategory};
use vhsim_core::engine::config::{Backend, PolicyChoice};
use vhsim_core::engine::{
    end_hesitancy, prepare_run, recompute_hesitancy, run, run_batch, RunRecord, SharedInputs, SimulationConfig,
};
use vhsim_core::eval::rank::{kendall_tau_b, tau_exact_pvalue, tau_pvalue, PValueMethod, RankingTable};
use vhsim_core::eval::{csv, p2_effort_gap, p3_stance_gap, EngineRunner};
use vhsim_core::llm::{extract_attitude, extract_judge_rating, extract_lessons, Gateway, RetryPolicy};
use vhsim_core::memory::{saliency, Lesson, LessonSource, MemoryStore};
use vhsim_core::persona::{sample_population, Attribute, DemographicMarginals, Persona};
use vhsim_core::recommend::{score_news, score_tweet, Embedding};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---- 1: equation oracles

fn brute_top_k(lessons: &[Lesson], now: u32, k: usize, decay: f64) -> Vec<(usize, f64)> {
    let g: Vec<f64> = lessons.iter().map(|l| l.importance + decay.powi((now - l.created_at) as i32)).collect();
    let (lo, hi) = g.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let mut idx: Vec<usize> = (0..lessons.len()).collect();
    idx.sort_by(|&a, &b| {
        g[b].total_cmp(&g[a])
            .then(lessons[b].created_at.cmp(&lessons[a].created_at))
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx.into_iter().map(|i| (i, if hi > lo { (g[i] - lo) / (hi - lo) } else { 1.0 })).collect()
}

fn eq1(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let cases = [(0.5, 1.0, 0, 0, 1.5), (0.8, 0.995, 0, 10, 0.8 + 0.995f64.powi(10)), (0.0, 1.0, 3, 40, 1.0)];
    for (alpha, decay, created, now, want) in cases {
        let got = saliency(&Lesson::new("x", alpha, created, LessonSource::News), now, decay).map_err(|e| e.to_string())?;
        check((got - want).abs() < 1e-9, || format!("saliency({alpha}, age {}) = {got}, want {want}", now - created))?;
    }
    check((0.8 + 0.995f64.powi(10) - 1.751110).abs() < 1e-6, || "worked example".into())?;
    for case in 0..1000 {
        let n = rng.random_range(1..=200);
        let now = 60;
        let decay = 0.995;
        let lessons: Vec<Lesson> = (0..n)
            .map(|i| {
                // coarse importances make saliency ties common
                let imp = f64::from(rng.random_range(0..=10u8)) / 10.0;
                Lesson::new(format!("l{i}"), imp, rng.random_range(0..=now), LessonSource::Tweet)
            })
            .collect();
        let mut store = MemoryStore::new(0, decay).unwrap();
        store.add_lessons(lessons.clone());
        let k = rng.random_range(1..=8);
        let got = store.top_k_salient(now, k).map_err(|e| e.to_string())?;
        let want = brute_top_k(&lessons, now, k, decay);
        check(got.len() == want.len(), || format!("case {case}: {} vs {} lessons", got.len(), want.len()))?;
        for (g, (i, norm)) in got.iter().zip(&want) {
            check(g.lesson.text == lessons[*i].text && (g.normalized - norm).abs() < 1e-9, || {
                format!("case {case}: got {} ({}) want {} ({norm})", g.lesson.text, g.normalized, lessons[*i].text)
            })?;
        }
    }
    Ok(())
}

fn dist(p: [f64; 4]) -> AttitudeDistribution {
    AttitudeDistribution::new(p).unwrap()
}

fn temp(t: f64) -> ModulationTemperature {
    ModulationTemperature::new(t).unwrap()
}

fn max_diff(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn eq2(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let p = dist([0.1, 0.1, 0.35, 0.45]);
    check(max_diff(modulate(&p, temp(1.0)).probs(), p.probs()) < 1e-12, || "T = 1 identity".into())?;
    let want = [0.0290, 0.0290, 0.3551, 0.5870];
    let got = *modulate(&p, temp(0.5)).probs();
    check(max_diff(&got, &want) < 1e-4, || format!("T = 0.5 example: {got:?}"))?;
    let grid = [0.1, 0.5, 0.7, 1.0, 1.5, 2.0];
    let u = dist([0.25; 4]);
    for &t in &grid {
        check(max_diff(modulate(&u, temp(t)).probs(), u.probs()) < 1e-12, || format!("uniform moved at T = {t}"))?;
    }
    for _ in 0..1000 {
        let raw: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.01..1.0));
        let s: f64 = raw.iter().sum();
        let p = dist(raw.map(|x| x / s));
        let order = |q: &[f64; 4]| {
            let mut idx = [0usize, 1, 2, 3];
            idx.sort_by(|&a, &b| q[b].total_cmp(&q[a]).then(a.cmp(&b)));
            idx
        };
        for &t in &grid {
            let m = modulate(&p, temp(t));
            check(order(m.probs()) == order(p.probs()), || format!("order changed at T = {t}: {:?}", p.probs()))?;
            let sum: f64 = m.probs().iter().sum();
            check((sum - 1.0).abs() < 1e-9, || format!("sum {sum}"))?;
        }
        let (t1, t2) = (grid[rng.random_range(0..6)], grid[rng.random_range(0..6)]);
        // the law is exact only while p^(1/T) stays well above the epsilon floor
        let tightest = t1.min(t2).min(t1 * t2);
        if p.probs().iter().any(|&x| x.powf(1.0 / tightest) < 1e-6) {
            continue;
        }
        let twice = modulate(&modulate(&p, temp(t1)), temp(t2));
        let once = modulate(&p, temp(t1 * t2));
        check(max_diff(twice.probs(), once.probs()) < 1e-6, || format!("composition {t1} x {t2}"))?;
    }
    Ok(())
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Embedding {
    Embedding((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
}

fn naive_cosine(a: &Embedding, b: &Embedding) -> f64 {
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    let na: f64 = a.0.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.0.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn eq34(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for case in 0..500 {
        let dim = rng.random_range(2..40);
        let history: Vec<Embedding> = (0..rng.random_range(1..20)).map(|_| random_unit(rng, dim)).collect();
        let cand = random_unit(rng, dim);
        let oracle = history.iter().map(|h| naive_cosine(h, &cand)).fold(f64::NEG_INFINITY, f64::max);
        let news = score_news(&history, &cand).map_err(|e| e.to_string())?;
        check((news - oracle).abs() < 1e-9, || format!("case {case}: news {news} vs {oracle}"))?;
        let age = rng.random_range(0..6);
        let follows = rng.random_bool(0.5);
        let tweet = score_tweet(&history, &cand, age, follows, 0.9, 0.3).map_err(|e| e.to_string())?;
        let want = oracle * 0.9f64.powi(age as i32) + if follows { 0.3 } else { 0.0 };
        check((tweet - want).abs() < 1e-9, || format!("case {case}: tweet {tweet} vs {want}"))?;
        let flipped = score_tweet(&history, &cand, age, !follows, 0.9, 0.3).map_err(|e| e.to_string())?;
        check(((tweet - flipped).abs() - 0.3).abs() < 1e-12, || format!("case {case}: follow flip {}", tweet - flipped))?;
        if oracle >= 0.0 {
            let older = score_tweet(&history, &cand, age + 1, follows, 0.9, 0.3).map_err(|e| e.to_string())?;
            check(older <= tweet, || format!("case {case}: score rose with age"))?;
        }
    }
    let one = Embedding(vec![1.0, 0.0]);
    let s = score_tweet(std::slice::from_ref(&one), &one, 0, true, 0.9, 0.3).unwrap();
    check((s - 1.3).abs() < 1e-12, || format!("max_sim 1, age 0, followed: {s}"))?;
    let half = Embedding(vec![0.5, 0.75f64.sqrt()]);
    let s = score_tweet(&[one], &half, 2, true, 0.9, 0.3).unwrap();
    check((s - 0.705).abs() < 1e-12, || format!("max_sim 0.5, age 2, followed: {s}"))
}

fn scripted_config(n: usize, steps: u32, warmup: u32) -> SimulationConfig {
    let mut c = SimulationConfig { n_agents: n, steps, warmup, ..Default::default() };
    c.llm.backend = Backend::Scripted;
    c.llm.retry = RetryPolicy::immediate(1);
    c
}

fn single_run(config: &SimulationConfig, seed: u64) -> Result<RunRecord, String> {
    let gw = config.llm.gateway().map_err(|e| e.to_string())?;
    let shared = SharedInputs::prepare(config, &gw).map_err(|e| e.to_string())?;
    let inputs = prepare_run(config, &shared, seed, &gw).map_err(|e| e.to_string())?;
    run(config, &inputs, &gw, seed).map_err(|e| e.to_string())
}

fn eq5() -> Result<(), String> {
    let mut c = scripted_config(30, 8, 3);
    c.news.generate_per_stance = 10;
    let rec = single_run(&c, 4)?;
    let mut recomputed = Vec::new();
    for step in &rec.steps {
        let h = recompute_hesitancy(step).map_err(|e| e.to_string())?;
        let n = step.agents.iter().filter(|a| (1..=2).contains(&a.sample)).count();
        check(h == step.hesitancy() && h == n as f64 / step.agents.len() as f64, || {
            format!("step {}: logged {} recomputed {h}", step.step(), step.hesitancy())
        })?;
        recomputed.push(h);
    }
    let tail = &recomputed[recomputed.len() - 3..];
    let want = tail.iter().sum::<f64>() / 3.0;
    let got = end_hesitancy(&rec).map_err(|e| e.to_string())?;
    check(got == want, || format!("end hesitancy {got} vs {want}"))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    eq1(&mut rng).map_err(|e| format!("saliency: {e}"))?;
    eq2(&mut rng).map_err(|e| format!("modulation: {e}"))?;
    eq34(&mut rng).map_err(|e| format!("recommendation: {e}"))?;
    eq5().map_err(|e| format!("end hesitancy: {e}"))?;
    let secs = start.elapsed().as_secs_f64();
    check(secs < 5.0, || format!("took {secs:.2} s (limit 5 s)"))?;
    Ok(format!("all oracles agree ({secs:.2} s)"))
}

// ---- 2: rank agreement

fn criterion_2() -> Outcome {
    let table = RankingTable::bundled();
    let expert = table.column("Expert").ok_or("no Expert column")?;
    let llama = table.column("Llama-3.1").ok_or("no Llama-3.1 column")?;
    let qwen = table.column("Qwen").ok_or("no Qwen column")?;
    let tau_l = kendall_tau_b(llama, expert).map_err(|e| e.to_string())?;
    let tau_q = kendall_tau_b(qwen, expert).map_err(|e| e.to_string())?;
    check((tau_l - 0.733).abs() <= 0.005, || format!("Llama-3.1 tau {tau_l:.4}"))?;
    check((tau_q - 0.690).abs() <= 0.005, || format!("Qwen tau {tau_q:.4}"))?;
    let p_l = tau_exact_pvalue(llama, expert).map_err(|e| e.to_string())?;
    check((p_l - 0.056).abs() <= 0.01, || format!("Llama-3.1 exact p {p_l:.4}"))?;
    // Qwen's ranking is tied: the permutation p sits on a coarser lattice,
    // and the target value matches the tie-corrected normal approximation
    let p_q_exact = tau_exact_pvalue(qwen, expert).map_err(|e| e.to_string())?;
    let p_q = tau_pvalue(qwen, expert, PValueMethod::Auto).map_err(|e| e.to_string())?;
    check((p_q - 0.056).abs() <= 0.01, || format!("Qwen p {p_q:.4}"))?;
    Ok(format!(
        "tau_b Llama-3.1 {tau_l:.3}, Qwen {tau_q:.3}; p Llama-3.1 {p_l:.4} (exact), Qwen {p_q:.4} (tie-corrected normal; exact permutation gives {p_q_exact:.4})"
    ))
}

// ---- 3: determinism and scans

fn criterion_3() -> Outcome {
    let mut c = scripted_config(100, 20, 5);
    c.seed = 42;
    c.log_prompts = true;
    c.policy = Some(PolicyChoice { category: PolicyCategory::Incentive, effort: Effort::Strong, catalog: None });
    let gw = c.llm.gateway().map_err(|e| e.to_string())?;
    let shared = SharedInputs::prepare(&c, &gw).map_err(|e| e.to_string())?;
    let policy_text = shared.policy.as_ref().ok_or("no policy resolved")?.description.clone();
    let mut logs = Vec::new();
    let mut slowest = 0.0f64;
    let mut last = None;
    for _ in 0..2 {
        let start = Instant::now();
        let inputs = prepare_run(&c, &shared, c.seed, &gw).map_err(|e| e.to_string())?;
        let rec = run(&c, &inputs, &gw, c.seed).map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed().as_secs_f64());
        check(rec.is_complete() && rec.steps.len() == 20, || "run incomplete".into())?;
        logs.push(rec.to_jsonl());
        last = Some(rec);
    }
    check(logs[0] == logs[1], || "run logs differ".into())?;
    check(slowest < 60.0, || format!("run took {slowest:.1} s"))?;
    let rec = last.expect("two runs");
    let mut leaks = 0;
    let mut delivered = 0;
    let mut same_step = 0;
    for step in &rec.steps {
        for a in &step.agents {
            let mentions = a.calls.iter().any(|call| call.user.contains(&policy_text) || call.system.contains(&policy_text));
            if a.step < c.warmup && (mentions || a.policy_shown) {
                leaks += 1;
            }
            if a.step >= c.warmup && mentions {
                delivered += 1;
            }
            same_step += a.tweets_read.iter().filter(|t| t.posted_at >= a.step).count();
        }
    }
    check(leaks == 0, || format!("{leaks} agent-steps saw the policy during warmup"))?;
    check(same_step == 0, || format!("{same_step} same-step tweet reads"))?;
    check(delivered > 0, || "policy text never delivered after warmup".into())?;
    Ok(format!(
        "byte-identical logs ({} bytes), slowest run {slowest:.2} s, 0 warmup leaks, 0 same-step reads",
        logs[0].len()
    ))
}

// ---- 4: scripted policy sensitivity

fn criterion_4() -> Outcome {
    let mut c = scripted_config(100, 20, 5);
    c.seeds = vec![0, 1, 2, 3, 4];
    let gw = c.llm.gateway().map_err(|e| e.to_string())?;
    let mut runner = EngineRunner::new(&gw);
    let p2 = p2_effort_gap(&c, PolicyCategory::Incentive, &mut runner).map_err(|e| e.to_string())?;
    let p3 = p3_stance_gap(&c, &mut runner).map_err(|e| e.to_string())?;
    check(p2.gap > 0.02, || format!("P2 gap {:.4}", p2.gap))?;
    check(p3.gap > 0.0, || format!("P3 gap {:.4}", p3.gap))?;
    Ok(format!(
        "P2 incentive gap {:.3} (dH weak {:.3}, strong {:.3}); P3 gap {:.3} (drift neg {:+.3}, pos {:+.3}); 5 seeds",
        p2.gap, p2.delta_weak, p2.delta_strong, p3.gap, p3.drift_negative, p3.drift_positive
    ))
}

// ---- 5: robust parsing

fn criterion_5() -> Outcome {
    let one = vec![("the government incentivizes vaccines with cash".to_string(), 0.9)];
    let two = vec![
        ("the government incentivizes vaccines with cash".to_string(), 0.9),
        ("today no one gets infected".to_string(), 0.8),
    ];
    let lesson_cases: Vec<(&str, Vec<(String, f64)>)> = vec![
        (r#"[["the government incentivizes vaccines with cash", 0.9]]"#, one.clone()),
        (
            r#"[["the government incentivizes vaccines with cash", 0.9], ["today no one gets infected", 0.8]"]"#,
            two.clone(),
        ),
        ("```json\n[[\"the government incentivizes vaccines with cash\", 0.9]]\n```", one.clone()),
        (r#"Here you go: [["the government incentivizes vaccines with cash", 0.9]] hope it helps"#, one.clone()),
        (r#"[["the government incentivizes vaccines with cash", 0.9], ["today no one gets infected", 0.8]"#, two),
        (r#"[["the government incentivizes vaccines with cash", "0.9"]]"#, one),
        (r#"[["too important", 1.7]]"#, vec![("too important".to_string(), 1.0)]),
        ("no json here", vec![]),
        ("", vec![]),
    ];
    for (i, (text, want)) in lesson_cases.iter().enumerate() {
        let got = extract_lessons(text).lessons;
        check(&got == want, || format!("lesson case {i}: {got:?}"))?;
    }
    let att = r#"{"reasoning": "I have learned that the vaccine is effective and safe", "attitude_dist": [0.0, 0.1, 0.2, 0.7]}"#;
    let a = extract_attitude(att).map_err(|e| format!("attitude example: {e}"))?;
    check(a.raw == [0.0, 0.1, 0.2, 0.7], || format!("attitude example: {:?}", a.raw))?;
    let fenced = extract_attitude(&format!("```json\n{att}\n```")).map_err(|e| format!("fenced attitude: {e}"))?;
    check(fenced.raw == a.raw, || "fenced attitude differs".into())?;
    check(extract_attitude(r#"{"reasoning": "x", "attitude_dist": [0.2, 0.3, 0.5]}"#).is_err(), || {
        "3-element attitude accepted".into()
    })?;
    let j = extract_judge_rating(r#"{"reasoning": "This is a well-written response.", "rating": "4"}"#);
    check(j.as_ref().map(|r| r.1) == Ok(4), || format!("judge example: {j:?}"))?;
    check(extract_judge_rating(r#"{"reasoning": "r", "rating": "6"}"#).is_err(), || "rating 6 accepted".into())?;
    check(extract_judge_rating(r#"{"reasoning": "r", "rating": 3}"#).map(|r| r.1) == Ok(3), || "bare 3".into())?;
    let fixtures = lesson_cases.len() + 6;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut panics = 0;
    for _ in 0..10_000 {
        let len = rng.random_range(0..200);
        let mut bytes = vec![0u8; len];
        rng.fill_bytes(&mut bytes);
        // bias half the inputs toward JSON punctuation
        if rng.random_bool(0.5) {
            const ALPHABET: &[u8] = b"[]{}\",:0123456789.-e aattitude_distratingreasoning`\\";
            bytes.iter_mut().for_each(|b| *b = ALPHABET[*b as usize % ALPHABET.len()]);
        }
        let text = String::from_utf8_lossy(&bytes).into_owned();
        let ok = catch_unwind(AssertUnwindSafe(|| {
            let _ = extract_lessons(&text);
            let _ = extract_attitude(&text);
            let _ = extract_judge_rating(&text);
        }));
        if ok.is_err() {
            panics += 1;
        }
    }
    check(panics == 0, || format!("{panics} of 10000 fuzz inputs panicked"))?;
    Ok(format!("{fixtures} fixtures parse as expected; 10000 fuzz inputs, no panics"))
}

// ---- 6: persona fidelity

fn attribute_of(p: &Persona, a: Attribute) -> &str {
    match a {
        Attribute::AgeGroup => &p.age_group,
        Attribute::Education => &p.education,
        Attribute::Gender => &p.gender,
        Attribute::RaceEthnicity => &p.race_ethnicity,
        Attribute::Occupation => &p.occupation,
        Attribute::PoliticalBelief => &p.political_belief,
        Attribute::Religion => &p.religion,
    }
}

fn criterion_6() -> Outcome {
    let marginals = DemographicMarginals::bundled();
    let people = sample_population(&marginals, 10_000, 2024);
    let mut worst = (0.0f64, String::new());
    for attr in Attribute::ALL {
        let m = marginals.get(attr);
        for (cat, &p) in m.categories.iter().zip(&m.probabilities) {
            let freq = people.iter().filter(|x| attribute_of(x, attr) == cat).count() as f64 / people.len() as f64;
            let err = (freq - p).abs();
            if err > worst.0 {
                worst = (err, format!("{attr}/{cat}"));
            }
        }
    }
    check(worst.0 <= 0.02, || format!("{} off by {:.2} points", worst.1, 100.0 * worst.0))?;
    Ok(format!("10000 personas; largest deviation {:.2} points ({})", 100.0 * worst.0, worst.1))
}

// ---- 7: smoke run against any chat endpoint

fn criterion_7() -> Outcome {
    let mut c = scripted_config(10, 8, 3);
    c.seeds = vec![c.seed];
    c.news.generate_per_stance = 4;
    let endpoint = std::env::var("VHSIM_SMOKE_BASE_URL").ok();
    if let Some(url) = &endpoint {
        c.llm.backend = Backend::Http;
        c.llm.http.base_url = url.clone();
        if let Ok(model) = std::env::var("VHSIM_SMOKE_MODEL") {
            c.llm.http.model = model;
        }
        c.llm.retry = RetryPolicy::default();
    }
    let gw: Gateway = c.llm.gateway().map_err(|e| e.to_string())?;
    let shared = SharedInputs::prepare(&c, &gw).map_err(|e| e.to_string())?;
    let batch = run_batch(&c, &shared, &gw, &c.seeds).map_err(|e| e.to_string())?;
    let rec = &batch.records[0];
    check(rec.is_complete(), || format!("run aborted: {:?}", rec.end.error))?;
    let mut with_lessons = 0;
    let mut total = 0;
    for (i, step) in rec.steps.iter().enumerate() {
        check(step.step() == i as u32, || format!("step index {} at position {i}", step.step()))?;
        for a in &step.agents {
            let sum: f64 = a.modulated.iter().sum();
            check(a.modulated.iter().all(|p| (0.0..=1.0).contains(p)) && (sum - 1.0).abs() < 1e-9, || {
                format!("invalid distribution {:?}", a.modulated)
            })?;
            total += 1;
            with_lessons += usize::from(!a.lessons_added.is_empty());
        }
    }
    let frac = with_lessons as f64 / total as f64;
    check(frac >= 0.8, || format!("lessons on {:.0}% of agent-steps", 100.0 * frac))?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let batches = vec![("smoke".to_string(), batch.clone())];
    let runs = csv::write(dir.path(), "runs.csv", &csv::runs(&batches)).map_err(|e| e.to_string())?;
    let traj = csv::write(dir.path(), "trajectories.csv", &csv::trajectories(&batches)).map_err(|e| e.to_string())?;
    let traj_rows = std::fs::read_to_string(&traj).map_err(|e| e.to_string())?.lines().count();
    check(runs.exists() && traj_rows == 1 + 8, || format!("metrics CSV has {traj_rows} lines"))?;
    let backend = endpoint.unwrap_or_else(|| "scripted backend; set VHSIM_SMOKE_BASE_URL for a live endpoint".into());
    Ok(format!("n=10 L=8 W=3 structural checks hold, lessons on {:.0}% of agent-steps ({backend})", 100.0 * frac))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 7] = [
        ("1 equation oracles", criterion_1),
        ("2 rank agreement", criterion_2),
        ("3 deterministic end-to-end", criterion_3),
        ("4 scripted policy sensitivity", criterion_4),
        ("5 robust parsing", criterion_5),
        ("6 persona fidelity", criterion_6),
        ("7 endpoint smoke run", criterion_7),
    ];
    let mut failed = Vec::new();
    for (name, f) in criteria {
        let outcome = catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                println!("FAIL criterion {name}: {why}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
