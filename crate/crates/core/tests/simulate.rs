use codesign_core::constraints::ConstraintTag;
use codesign_core::mec::{MotorConstants, MotorDesign};
use codesign_core::plant::Drivetrain;
use codesign_core::robot::ArmModel;
use codesign_core::simulate::{resimulate, SimulateError, SimulationOptions};
use codesign_core::trajectory::Trajectory;
use codesign_core::transcription::{transcribe, DesignMode, Objective, TaskSpec, TranscriptionOptions};
use nlp::{InteriorPoint, SolveStatus, SolverOptions};

#[test]
fn rest_without_gravity_or_input_does_not_move() {
    let mut arm = ArmModel::standin();
    arm.gravity_m_s2 = 0.0;
    let c = MotorConstants::default();
    let plant = Drivetrain::new(&arm, &vec![MotorDesign::reference(); 6], &c, 1.0).unwrap();
    let mut x = vec![0.0; 24];
    x[..6].copy_from_slice(&[0.3, -0.2, 0.5, 0.0, 1.0, -1.0]);
    let traj = Trajectory::new(6, vec![0.0, 0.1, 0.2], vec![x.clone(), x.clone(), x], vec![vec![0.0; 12]; 2]).unwrap();
    let r = resimulate(&plant, &traj, &arm.limits(), &Default::default(), &SimulationOptions::default()).unwrap();
    assert_eq!(r.max_deviation(), 0.0);
    assert_eq!(r.local_mechanical_deviation, 0.0);
    assert_eq!(r.max_violation, 0.0);
    assert!(r.worst.is_none());
}

fn solved() -> (ArmModel, Drivetrain<f64>, Trajectory) {
    let arm = ArmModel::standin().truncated(1);
    let c = MotorConstants::default();
    let d = vec![MotorDesign::reference()];
    let task = TaskSpec::pick_and_place(1, 0.6, 2.0);
    let opts = TranscriptionOptions { intervals: 20, ..Default::default() };
    let t = transcribe(&arm, &c, &task, Objective::MinimumEnergy { final_time: 0.8 }, &DesignMode::Fixed(d.clone()), &opts).unwrap();
    let sol = InteriorPoint::new(SolverOptions::default()).solve(t.nlp());
    assert_eq!(sol.report.status, SolveStatus::Optimal);
    let traj = t.extract_trajectory(&sol.x).unwrap().trajectory;
    let plant = Drivetrain::new(&arm, &d, &c, 2.0).unwrap();
    (arm, plant, traj)
}

#[test]
fn solved_trajectory_replays_closely() {
    let (arm, plant, traj) = solved();
    let r = resimulate(&plant, &traj, &arm.limits(), &Default::default(), &SimulationOptions::default()).unwrap();
    println!("{r:?}");
    assert!(r.local_mechanical_deviation < 5e-2, "{r:?}");
    assert!(r.mechanical_deviation < 0.1, "{r:?}");
}

#[test]
fn tampered_control_is_flagged() {
    let (arm, plant, mut traj) = solved();
    let base = resimulate(&plant, &traj, &arm.limits(), &Default::default(), &SimulationOptions::default()).unwrap();
    for u in &mut traj.controls {
        u[1] = 150.0;
    }
    let r = resimulate(&plant, &traj, &arm.limits(), &Default::default(), &SimulationOptions::default()).unwrap();
    assert!(r.max_violation >= 50.0 - 1e-9);
    assert!(r.mechanical_deviation > 10.0 * base.mechanical_deviation);
    let worst = r.worst.unwrap();
    assert!(matches!(worst.tag, ConstraintTag::VoltageQ | ConstraintTag::CurrentQ | ConstraintTag::CurrentD | ConstraintTag::RotorSpeed));
}

#[test]
fn mismatched_axes_and_refinement() {
    let (arm, plant, traj) = solved();
    let six = Trajectory::new(6, vec![0.0, 1.0], vec![vec![0.0; 24]; 2], vec![vec![0.0; 12]]).unwrap();
    assert!(matches!(
        resimulate(&plant, &six, &arm.limits(), &Default::default(), &SimulationOptions::default()),
        Err(SimulateError::AxisCount { traj: 6, plant: 1 })
    ));
    let opts = SimulationOptions { refine: 0, ..Default::default() };
    assert!(matches!(resimulate(&plant, &traj, &arm.limits(), &Default::default(), &opts), Err(SimulateError::Refinement)));
}

#[test]
fn blown_up_replay_is_reported_not_raised() {
    let (arm, plant, mut traj) = solved();
    // a long interval under absurd voltage spins the rotor out of range
    for u in &mut traj.controls {
        u[1] = 1e300;
    }
    let r = resimulate(&plant, &traj, &arm.limits(), &Default::default(), &SimulationOptions::default()).unwrap();
    assert!(r.diverged_at.is_some());
    assert!(!r.is_feasible(f64::MAX));
    assert_eq!(r.max_violation, f64::INFINITY);
}
