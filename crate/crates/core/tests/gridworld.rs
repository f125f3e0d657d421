use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vcse_core::gridworld::*;

fn fixed(name: TaskKind, size: usize) -> MapSpec {
    let mut spec = builtin_task(name, size).unwrap();
    spec.randomize_layout = false;
    spec
}

fn random_actions(n: usize, seed: u64) -> Vec<Action> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Action::ALL[r.random_range(0..6)]).collect()
}

fn rollout(spec: &MapSpec, seed: u64, actions: &[Action]) -> Vec<Transition> {
    let mut env = GridEnv::new(spec.clone(), ObsMode::PartialGrid).unwrap();
    env.reset(seed).unwrap();
    let mut out = Vec::new();
    for &a in actions {
        if env.is_finished() {
            break;
        }
        out.push(env.step(a).unwrap());
    }
    out
}

#[test]
fn fixed_layout_resets_identically() {
    let spec = builtin_task(TaskKind::SimpleCrossingFixed, 9).unwrap();
    let mut a = GridEnv::new(spec.clone(), ObsMode::FullOneHot).unwrap();
    let mut b = GridEnv::new(spec, ObsMode::FullOneHot).unwrap();
    assert_eq!(a.reset(3).unwrap(), b.reset(3).unwrap());
    // the seed is irrelevant without layout randomization
    assert_eq!(a.reset(3).unwrap(), b.reset(99).unwrap());
}

#[test]
fn identical_inputs_give_identical_transitions() {
    for name in TaskKind::ALL {
        let spec = builtin_task(name, 8).unwrap();
        let actions = random_actions(300, 11);
        assert_eq!(rollout(&spec, 5, &actions), rollout(&spec, 5, &actions));
    }
}

#[test]
fn randomized_layouts_differ_across_seeds() {
    for name in [TaskKind::LavaGap, TaskKind::SimpleCrossingRandom, TaskKind::DoorKey, TaskKind::Unlock] {
        let spec = builtin_task(name, 7).unwrap();
        let mut env = GridEnv::new(spec, ObsMode::FullOneHot).unwrap();
        let differing = (0..20u64)
            .filter(|&p| {
                env.reset(2 * p).unwrap();
                let a = env.cells().to_vec();
                env.reset(2 * p + 1).unwrap();
                a != env.cells()
            })
            .count();
        assert!(differing >= 15, "{name:?}: only {differing}/20 seed pairs differ");
    }
}

#[test]
fn map_without_goal_is_invalid() {
    let mut spec = builtin_task(TaskKind::Empty, 6).unwrap();
    spec.cells = spec.cells.iter().map(|&c| if c == CellKind::Goal { CellKind::Floor } else { c }).collect();
    assert!(matches!(GridEnv::new(spec, ObsMode::AgentXY), Err(GridError::InvalidMap(_))));
}

#[test]
fn forward_into_wall_changes_nothing() {
    let spec = builtin_task(TaskKind::Empty, 6).unwrap();
    let mut env = GridEnv::new(spec, ObsMode::AgentXY).unwrap();
    env.reset(0).unwrap();
    env.step(Action::TurnLeft).unwrap(); // now facing north, wall ahead
    let before = env.pose();
    let t = env.step(Action::Forward).unwrap();
    assert_eq!(env.pose(), before);
    assert_eq!(t.extrinsic_reward, 0.0);
    assert!(!t.terminated && !t.truncated);
}

#[test]
fn goal_on_step_ten_of_hundred_pays_0_91() {
    let start = AgentStart { x: 2, y: 3, heading: Heading::East };
    let spec = MapSpec::from_rows(&["#####", "#...#", "#...#", "#..G#", "#####"], start).unwrap();
    assert_eq!(spec.max_steps(), 100);
    let mut env = GridEnv::new(spec, ObsMode::AgentXY).unwrap();
    env.reset(0).unwrap();
    for _ in 0..9 {
        assert_eq!(env.step(Action::Done).unwrap().extrinsic_reward, 0.0);
    }
    let t = env.step(Action::Forward).unwrap();
    assert!(t.terminated && t.reached_goal && !t.truncated);
    assert!((t.extrinsic_reward - 0.91).abs() < 1e-12);
    assert!(matches!(env.step(Action::Done), Err(GridError::EpisodeFinished)));
}

#[test]
fn lava_terminates_without_reward() {
    let start = AgentStart { x: 1, y: 1, heading: Heading::East };
    let spec = MapSpec::from_rows(&["#####", "#.L.#", "#..G#", "#####"], start).unwrap();
    let mut env = GridEnv::new(spec, ObsMode::AgentXY).unwrap();
    env.reset(0).unwrap();
    let t = env.step(Action::Forward).unwrap();
    assert!(t.terminated && !t.reached_goal && !t.truncated);
    assert_eq!(t.extrinsic_reward, 0.0);
}

#[test]
fn locked_door_needs_the_key() {
    let start = AgentStart { x: 1, y: 1, heading: Heading::East };
    let spec = MapSpec::from_rows(&["######", "#.D.G#", "#K#..#", "######"], start).unwrap();
    let mut env = GridEnv::new(spec, ObsMode::AgentXY).unwrap();
    env.reset(0).unwrap();
    env.step(Action::Toggle).unwrap();
    assert_eq!(env.cells()[2 + 6], CellKind::Door { locked: true });
    env.step(Action::Forward).unwrap();
    assert_eq!((env.pose().x, env.pose().y), (1, 1));

    env.step(Action::TurnRight).unwrap();
    env.step(Action::Pickup).unwrap();
    assert!(env.pose().has_key);
    assert_eq!(env.cells()[1 + 2 * 6], CellKind::Floor);
    env.step(Action::TurnLeft).unwrap();
    env.step(Action::Toggle).unwrap();
    assert_eq!(env.cells()[2 + 6], CellKind::Door { locked: false });
    for _ in 0..2 {
        assert!(!env.step(Action::Forward).unwrap().terminated);
    }
    assert!(env.step(Action::Forward).unwrap().reached_goal);
}

#[test]
fn episode_truncates_at_max_steps() {
    let spec = builtin_task(TaskKind::Empty, 6).unwrap();
    let mut env = GridEnv::new(spec, ObsMode::AgentXY).unwrap();
    env.reset(0).unwrap();
    let mut last = None;
    while !env.is_finished() {
        last = Some(env.step(Action::TurnLeft).unwrap());
    }
    let t = last.unwrap();
    assert_eq!(t.info.step_index, 144);
    assert!(t.truncated && !t.terminated);
}

#[test]
fn empty_6x6_state_count_matches_enumeration() {
    let spec = builtin_task(TaskKind::Empty, 6).unwrap();
    let floor = spec.cells.iter().filter(|&&c| c == CellKind::Floor).count();
    let model = TransitionModel::build(&spec, 1.0).unwrap();
    assert_eq!(floor, 15);
    assert_eq!(model.num_states(), 4 * floor);
}

#[test]
fn model_agrees_with_step_on_random_rollouts() {
    for name in TaskKind::ALL {
        for size in [6, 9] {
            let spec = fixed(name, size);
            let model = TransitionModel::build(&spec, 1.0).unwrap();
            let mut env = GridEnv::new(spec.clone(), ObsMode::FullOneHot).unwrap();
            let mut r = ChaCha8Rng::seed_from_u64(size as u64);
            for _ in 0..1000 {
                env.reset(0).unwrap();
                let mut s = model.start();
                loop {
                    let a = Action::ALL[r.random_range(0..6)];
                    let t = env.step(a).unwrap();
                    match model.step(s, a) {
                        ModelStep::Next { state, reward } => {
                            assert!(!t.terminated);
                            assert_eq!(reward, 0.0);
                            let ms = model.state(state);
                            assert_eq!(ms.pose, env.pose());
                            assert_eq!(model.cells_for(&ms), env.cells());
                            assert_eq!(model.observe(state, ObsMode::FullOneHot), t.next_obs);
                            s = state;
                        }
                        ModelStep::Terminal { reached_goal, .. } => {
                            assert!(t.terminated);
                            assert_eq!(reached_goal, t.reached_goal);
                            break;
                        }
                    }
                    if t.truncated {
                        break;
                    }
                }
            }
        }
    }
}

#[test]
fn full_one_hot_decodes_every_visited_state() {
    let spec = fixed(TaskKind::DoorKey, 8);
    let mut env = GridEnv::new(spec, ObsMode::FullOneHot).unwrap();
    env.reset(0).unwrap();
    for a in random_actions(2000, 4) {
        if env.is_finished() {
            env.reset(0).unwrap();
        }
        let t = env.step(a).unwrap();
        let (cells, pose) = t.next_obs.decode_full(8, 8).unwrap();
        assert_eq!(cells, env.cells());
        assert_eq!(pose, env.pose());
    }
}

#[test]
fn builtin_maps_survive_json() {
    for name in TaskKind::ALL {
        let spec = builtin_task(name, 10).unwrap();
        assert_eq!(MapSpec::from_json(&spec.to_json()).unwrap(), spec);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rewards_are_sparse_and_pose_stays_legal(task in 0usize..6, size in 6usize..=12, seed in 0u64..1000, actions in prop::collection::vec(0usize..6, 1..400)) {
        let spec = builtin_task(TaskKind::ALL[task], size).unwrap();
        let mut env = GridEnv::new(spec, ObsMode::AgentXY).unwrap();
        env.reset(seed).unwrap();
        for a in actions {
            if env.is_finished() {
                break;
            }
            let t = env.step(Action::from_index(a).unwrap()).unwrap();
            prop_assert!((0.0..=1.0).contains(&t.extrinsic_reward));
            prop_assert_eq!(t.extrinsic_reward > 0.0, t.reached_goal);
            prop_assert!(!(t.terminated && t.truncated));
            let p = env.pose();
            let cell = env.cells()[p.y * size + p.x];
            prop_assert!(cell != CellKind::Wall);
            if !t.terminated {
                prop_assert!(cell != CellKind::Lava && cell != CellKind::Goal);
            }
        }
    }
}
