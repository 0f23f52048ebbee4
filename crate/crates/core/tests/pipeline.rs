use codesign_core::mec::{check_geometry, coupling_residuals, derive_params, DesignBounds, MotorConstants, MotorDesign};
use codesign_core::pipeline::{
    average_designs, is_feasible_design, weighted_average_designs, ApplicationSet, Grid, Mode, Pipeline, PipelineError, PipelineSettings, Strategy, TaskEntry,
};
use codesign_core::robot::ArmModel;
use codesign_core::transcription::{Objective, TranscriptionOptions};

const LONG_THIN: [f64; 7] = [98.0, 14.0, 32.0, 1.0, 6.0, 5.0, 1.0];
const SHORT_WIDE: [f64; 7] = [37.0, 24.0, 54.0, 1.0, 6.0, 10.0, 2.0];

fn pipeline(intervals: usize) -> Pipeline {
    let settings = PipelineSettings { transcription: TranscriptionOptions { intervals, ..Default::default() }, ..Default::default() };
    Pipeline::new(ArmModel::standin().truncated(1), MotorConstants::default(), DesignBounds::default(), settings).unwrap()
}

fn feasible(d: &MotorDesign<f64>) -> bool {
    is_feasible_design(d, &MotorConstants::default(), &DesignBounds::default(), 1e-6)
}

#[test]
fn averaging_is_element_wise_per_axis() {
    let a = vec![MotorDesign::from_mm([20.0; 7]), MotorDesign::from_mm([1.0; 7])];
    let b = vec![MotorDesign::from_mm([40.0; 7]), MotorDesign::from_mm([3.0; 7])];
    let m = average_designs(&[a, b]).unwrap();
    assert!(m[0].to_mm().iter().all(|&v| (v - 30.0).abs() < 1e-12));
    assert!(m[1].to_mm().iter().all(|&v| (v - 2.0).abs() < 1e-12));

    assert!(matches!(average_designs(&[]), Err(PipelineError::EmptyInput)));
    let bad = [vec![MotorDesign::reference()], vec![MotorDesign::reference(); 2]];
    assert!(matches!(average_designs(&bad), Err(PipelineError::AxisMismatch { index: 1, expected: 1, got: 2 })));
}

#[test]
fn the_mean_of_feasible_designs_can_be_infeasible() {
    let (a, b) = (MotorDesign::from_mm(LONG_THIN), MotorDesign::from_mm(SHORT_WIDE));
    assert!(feasible(&a) && feasible(&b));
    let m = average_designs(&[vec![a], vec![b]]).unwrap()[0];
    let c = MotorConstants::default();
    let mass = coupling_residuals(&m, &c, &derive_params(&m, &c).unwrap()).values()[2];
    assert!(mass > 0.2, "mass residual {mass}");
}

#[test]
fn a_feasible_mean_is_kept_exactly() {
    let p = pipeline(10);
    let d = MotorDesign::from_mm(SHORT_WIDE);
    let r = p.reconcile(&d).unwrap();
    assert_eq!(r.design, d);
    assert_eq!(r.objective, 0.0);
}

#[test]
fn an_overweight_mean_lands_on_the_mass_cap() {
    let p = pipeline(10);
    let c = MotorConstants::default();
    let m = average_designs(&[vec![MotorDesign::from_mm(LONG_THIN)], vec![MotorDesign::from_mm(SHORT_WIDE)]]).unwrap()[0];
    let r = p.reconcile(&m).unwrap();
    assert!(feasible(&r.design));
    assert!(r.objective > 0.0);
    let prm = derive_params(&r.design, &c).unwrap();
    let mass = prm.stator_mass + prm.rotor_mass;
    assert!((mass - 3.0).abs() <= 1e-6, "mass {mass}");
}

#[test]
fn a_short_stack_is_clamped_to_its_bound() {
    // the stack length enters only the mass, which stays below the cap, so
    // the projection is min ((x - 15) / 15)^2 over x >= 20 with the rest free
    let p = pipeline(10);
    let mut mm = SHORT_WIDE;
    mm[3] = 2.0;
    assert!(feasible(&MotorDesign::from_mm(mm)));
    mm[0] = 15.0;
    let r = p.reconcile(&MotorDesign::from_mm(mm)).unwrap();
    let got = r.design.to_mm();
    assert!((got[0] - 20.0).abs() <= 1e-6, "{got:?}");
    for k in 1..7 {
        assert!((got[k] - mm[k]).abs() <= 1e-6 * mm[k], "{got:?}");
    }
    assert!((r.objective - (5.0f64 / 15.0).powi(2)).abs() <= 1e-6);
}

#[test]
fn a_mean_outside_the_box_is_pulled_inside() {
    let p = pipeline(10);
    let mut mm = SHORT_WIDE;
    mm[0] = 150.0;
    mm[3] = 0.5;
    let r = p.reconcile(&MotorDesign::from_mm(mm)).unwrap();
    assert!(DesignBounds::default().contains(&r.design));
    assert!(feasible(&r.design));
}

#[test]
fn weights_shift_the_mean() {
    let a = vec![MotorDesign::from_mm([20.0; 7])];
    let b = vec![MotorDesign::from_mm([40.0; 7])];
    let m = weighted_average_designs(&[a.clone(), b.clone()], &[3.0, 1.0]).unwrap();
    assert!(m[0].to_mm().iter().all(|&v| (v - 25.0).abs() < 1e-12));
    assert!(weighted_average_designs(&[a.clone(), b.clone()], &[0.0, 0.0]).is_err());
    assert!(weighted_average_designs(&[a, b], &[1.0]).is_err());
}

#[test]
fn the_initial_design_is_feasible_although_the_midpoint_is_not() {
    let p = pipeline(10);
    let c = MotorConstants::default();
    let mid = DesignBounds::default().midpoint();
    assert!(check_geometry(&mid, &c).is_err());
    let d = p.initial_design().unwrap();
    assert!(feasible(&d));
    assert!(check_geometry(&d, &c).is_ok());
}

#[test]
fn a_null_task_costs_no_energy() {
    let p = pipeline(10);
    let task = TaskEntry::new(0, 1, 0.0, 2.0);
    let d = p.initial_design().unwrap();
    let o = p.solve_fixed(&task, Objective::MinimumEnergy { final_time: 0.5 }, &[d], None).unwrap();
    assert!(o.objective <= 1e-8, "{}", o.objective);
}

#[test]
fn freeing_the_design_never_hurts_a_single_task() {
    let p = pipeline(10);
    let task = TaskEntry::new(0, 1, 1.0, 4.0);
    let d = p.initial_design().unwrap();
    let fixed = p.solve_fixed(&task, Objective::MinimumTime, &[d], None).unwrap();
    let free = p.codesign_single_task(&task, Objective::MinimumTime, &[d]).unwrap();
    println!("fixed {} free {}", fixed.objective, free.objective);
    assert!(free.objective <= fixed.objective + 1e-6);
    assert!(feasible(&free.designs[0]));
}

fn small_app() -> ApplicationSet {
    ApplicationSet::new(1, Grid { lambdas: vec![0.6, 1.0], payloads_kg: vec![2.0, 4.0] }).unwrap()
}

#[test]
fn multi_task_run_is_complete_and_deterministic() {
    let mut p = pipeline(8);
    let app = small_app();
    p.settings.workers = Some(1);
    let a = p.run_application(&app, Strategy::MultiTask, Mode::Time).unwrap();
    p.settings.workers = Some(3);
    let b = p.run_application(&app, Strategy::MultiTask, Mode::Time).unwrap();
    assert!(a.is_complete() && a.failures.is_empty(), "{:?}", a.failures);
    assert_eq!(a.candidates.len(), 4);
    assert_eq!(a.objective_matrix(), b.objective_matrix());
    assert_eq!(a.design(), b.design());
    assert!(feasible(&a.design()[0]));
    for o in &a.finals {
        assert!(o.max_violation <= 1e-6);
        assert_eq!(o.designs, a.design());
    }
}

#[test]
fn the_empirical_design_reproduces_its_anchor_task() {
    let p = pipeline(8);
    let app = small_app();
    let r = p.run_application(&app, Strategy::Empirical, Mode::Time).unwrap();
    let anchor = r.anchor.clone().unwrap();
    assert_eq!((anchor.lambda, anchor.payload_kg), (0.6, 2.0));
    assert_eq!(anchor.id, 0);
    assert_eq!(r.candidates.len(), 1);
    assert_eq!(r.reconciled[0].objective, 0.0);
    let cand = r.candidate(0).unwrap();
    let fin = r.final_outcome(0).unwrap();
    assert!((cand.objective - fin.objective).abs() <= 1e-6 * cand.objective, "{} vs {}", cand.objective, fin.objective);
}

#[test]
fn improvement_is_positive_where_the_first_run_is_cheaper() {
    use codesign_core::pipeline::ObjectiveMatrix;
    let a = ObjectiveMatrix { lambdas: vec![1.0], payloads_kg: vec![0.0, 1.0], values: vec![vec![Some(0.75), None]] };
    let b = ObjectiveMatrix { lambdas: vec![1.0], payloads_kg: vec![0.0, 1.0], values: vec![vec![Some(1.0), Some(2.0)]] };
    let i = a.improvement_over(&b).unwrap();
    assert!((i.values[0][0].unwrap() - 25.0).abs() < 1e-12);
    assert_eq!(i.values[0][1], None);
    assert_eq!(i.to_csv(), "lambda,0,1\n1,25,\n");
    assert!(i.to_gnuplot().starts_with("2 0 1\n1 "));
}

#[test]
fn settings_are_validated() {
    let mut s = PipelineSettings::default();
    s.energy_time_factor = 0.0;
    assert!(s.validate().is_err());
    let s = PipelineSettings { workers: Some(0), ..Default::default() };
    assert!(s.validate().is_err());
    assert!(ApplicationSet::new(1, Grid { lambdas: vec![], payloads_kg: vec![1.0] }).is_err());
    assert!(ApplicationSet::new(1, Grid { lambdas: vec![1.0], payloads_kg: vec![-1.0] }).is_err());
    assert_eq!(ApplicationSet::standard(6).tasks.len(), 25);
}
