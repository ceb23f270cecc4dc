//! A complete worked fixture: an invoice payment process where late payment
//! is compensated by daily interest and penalty charges.
//!
//! The process: an invoice over a principal amount must be paid within a
//! 15-day grace window (task `T2`). Missing it moves the debtor into a 7-day
//! interest window (`T3`, 3% of principal per day late), then a 10-day
//! penalty window (`T4`, an extra 2.5% of principal per day). If nothing is
//! paid by day 32 the contract is terminated (`T5`). Delivery of the
//! purchased equipment is confirmed in `T6`, expected within 3 days.
//!
//! [`generate_log`] turns scenarios into traces whose attributes match the
//! scoring spec from [`payment_spec`]:
//!
//! * `payInDays` — day of payment, attached to every payment task. `T2`
//!   scores it against its own 15-day window, later tasks against the staged
//!   bands (≤15 → 1, ≤22 → 0.6, ≤32 → 0.3, else 0).
//! * `paymentReceived` — the fraction of the amount due (principal plus
//!   accrued charges) received at that task: 1 at the task where payment
//!   happened, 0 before it.
//! * `equipmentDeliveryDays` — attached to `T6` (≤3 → 1, ≤7 → 0.5, else 0).
//! * `invoiceValue`, `invoiceDate`, `interest`, `penalty` — meta attributes,
//!   carried for reporting but never scored.

use chrono::NaiveDate;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{
    AttributeSpec, AttributeValue, ComplianceSpec, CutoffThreshold, DimensionId, ProcessLog,
    TaskEvent, TaskSelector, Trace,
};
use crate::projection::{NumericBands, ProjectionFn};

/// One execution scenario of the payment process.
#[derive(Debug, Clone, PartialEq)]
pub struct PaymentScenario {
    pub principal: f64,
    /// Day (after the invoice) on which full payment arrived.
    pub pay_in_days: u32,
    pub equipment_delivery_days: u32,
    pub interest_rate_per_day: f64,
    pub penalty_rate_per_day: f64,
    pub grace_days: u32,
    pub interest_window_days: u32,
    pub penalty_window_days: u32,
}

impl PaymentScenario {
    /// A scenario with the contract's standard rates and windows:
    /// 3%/day interest, 2.5%/day penalty, 15 + 7 + 10 day windows.
    pub fn new(principal: f64, pay_in_days: u32, equipment_delivery_days: u32) -> Self {
        PaymentScenario {
            principal,
            pay_in_days,
            equipment_delivery_days,
            interest_rate_per_day: 0.03,
            penalty_rate_per_day: 0.025,
            grace_days: 15,
            interest_window_days: 7,
            penalty_window_days: 10,
        }
    }
}

/// Scenario behind the fully compliant walkthrough: paid on day 10, $500,
/// equipment delivered in 2 days.
pub fn full_compliance_scenario() -> PaymentScenario {
    PaymentScenario::new(500.0, 10, 2)
}

/// Scenario behind the partially compliant walkthrough: paid on day 20, so
/// $75 interest is due on the $500 principal.
pub fn partial_compliance_scenario() -> PaymentScenario {
    PaymentScenario::new(500.0, 20, 2)
}

/// Scenario behind the non-compliant walkthrough: nothing paid by day 33,
/// terminating the contract.
pub fn non_compliance_scenario() -> PaymentScenario {
    PaymentScenario::new(500.0, 33, 2)
}

/// The amount a scenario owes, split into its parts.
#[derive(Debug, Clone, PartialEq)]
pub struct Payable {
    /// Principal plus accrued charges; the unpaid obligation when terminated.
    pub amount: f64,
    pub interest: f64,
    pub penalty: f64,
    /// True once payment falls outside every window.
    pub terminated: bool,
}

/// Computes the staged obligation: no charge through the grace window,
/// interest per day late afterwards, penalty per day on top once the
/// interest window is exhausted, termination after the penalty window.
/// Interest keeps accruing through the penalty window; on termination the
/// obligation is frozen at the end of the penalty window.
pub fn compute_payable(scenario: &PaymentScenario) -> Payable {
    let p = scenario.principal;
    let d = scenario.pay_in_days;
    let grace_end = scenario.grace_days;
    let interest_end = grace_end + scenario.interest_window_days;
    let penalty_end = interest_end + scenario.penalty_window_days;

    if d <= grace_end {
        return Payable {
            amount: p,
            interest: 0.0,
            penalty: 0.0,
            terminated: false,
        };
    }
    let charged_until = d.min(penalty_end);
    let interest = scenario.interest_rate_per_day * p * f64::from(charged_until - grace_end);
    let penalty = scenario.penalty_rate_per_day
        * p
        * f64::from(charged_until.saturating_sub(interest_end));
    Payable {
        amount: p + interest + penalty,
        interest,
        penalty,
        terminated: d > penalty_end,
    }
}

/// The 13 task orderings the payment process model admits.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceCatalog {
    sequences: Vec<Vec<&'static str>>,
}

impl TraceCatalog {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn sequences(&self) -> &[Vec<&'static str>] {
        &self.sequences
    }

    pub fn contains<S: AsRef<str>>(&self, sequence: &[S]) -> bool {
        self.sequences.iter().any(|known| {
            known.len() == sequence.len()
                && known
                    .iter()
                    .zip(sequence)
                    .all(|(a, b)| *a == b.as_ref())
        })
    }
}

/// Returns the admissible task orderings, verbatim.
pub fn catalog() -> TraceCatalog {
    TraceCatalog {
        sequences: vec![
            vec!["T1", "T2", "T3", "T4", "T5"],
            vec!["T1", "T3", "T2", "T6"],
            vec!["T1", "T2", "T3", "T4", "T6"],
            vec!["T1", "T3", "T4", "T2", "T5"],
            vec!["T1", "T2", "T3", "T6"],
            vec!["T1", "T3", "T4", "T2", "T6"],
            vec!["T1", "T2", "T6"],
            vec!["T1", "T3", "T4", "T5", "T2"],
            vec!["T1", "T3", "T2", "T4", "T5"],
            vec!["T1", "T3", "T4", "T6", "T2"],
            vec!["T1", "T3", "T2", "T4", "T6"],
            vec!["T1", "T3", "T6", "T2"],
            vec!["T1", "T6", "T2"],
        ],
    }
}

/// The scoring spec for the payment process: per-task `payInDays` bands for
/// `T2`, staged wildcard bands for the later payment tasks, payment-fraction
/// bands, delivery bands, and the meta attributes.
pub fn payment_spec() -> ComplianceSpec {
    let temporal = DimensionId::new("temporal");
    let monetary = DimensionId::new("monetary");
    let percentage = DimensionId::new("percentage");

    let mut spec = ComplianceSpec::new("payment-process");
    spec.dimension_defaults
        .insert(temporal.clone(), CutoffThreshold::new(0.3, 0.4));
    spec.dimension_defaults
        .insert(monetary.clone(), CutoffThreshold::new(0.3, 0.7));

    spec.attribute_specs.push(AttributeSpec::new(
        TaskSelector::Task("T2".into()),
        "payInDays",
        temporal.clone(),
        ProjectionFn::Bands(NumericBands::lower_is_better(vec![(15.0, 1.0)], 0.0)),
    ));
    spec.attribute_specs.push(AttributeSpec::new(
        TaskSelector::Any,
        "payInDays",
        temporal.clone(),
        ProjectionFn::Bands(NumericBands::lower_is_better(
            vec![(15.0, 1.0), (22.0, 0.6), (32.0, 0.3)],
            0.0,
        )),
    ));
    spec.attribute_specs.push(AttributeSpec::new(
        TaskSelector::Any,
        "paymentReceived",
        monetary.clone(),
        ProjectionFn::Bands(NumericBands::higher_is_better(
            vec![(1.0, 1.0), (0.8, 0.9), (0.75, 0.5), (0.5, 0.3)],
            0.0,
        )),
    ));
    spec.attribute_specs.push(AttributeSpec::new(
        TaskSelector::Any,
        "equipmentDeliveryDays",
        temporal.clone(),
        ProjectionFn::Bands(NumericBands::lower_is_better(
            vec![(3.0, 1.0), (7.0, 0.5)],
            0.0,
        )),
    ));
    spec.attribute_specs.push(AttributeSpec::meta(
        TaskSelector::Any,
        "invoiceValue",
        monetary,
    ));
    spec.attribute_specs.push(AttributeSpec::meta(
        TaskSelector::Any,
        "invoiceDate",
        temporal,
    ));
    spec.attribute_specs.push(AttributeSpec::meta(
        TaskSelector::Any,
        "interest",
        percentage.clone(),
    ));
    spec.attribute_specs
        .push(AttributeSpec::meta(TaskSelector::Any, "penalty", percentage));
    spec
}

fn invoice_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2019, 4, 1).expect("valid fixture date")
}

/// Task sequence a scenario takes, by how deep into the windows payment fell.
fn sequence_for(scenario: &PaymentScenario) -> Vec<&'static str> {
    let d = scenario.pay_in_days;
    let grace_end = scenario.grace_days;
    let interest_end = grace_end + scenario.interest_window_days;
    let penalty_end = interest_end + scenario.penalty_window_days;
    if d <= grace_end {
        vec!["T1", "T2", "T6"]
    } else if d <= interest_end {
        vec!["T1", "T2", "T3", "T6"]
    } else if d <= penalty_end {
        vec!["T1", "T2", "T3", "T4", "T6"]
    } else {
        vec!["T1", "T2", "T3", "T4", "T5"]
    }
}

/// Materializes one trace per scenario (ids `trace-1`, `trace-2`, ...),
/// with attributes attached as described in the module docs.
pub fn generate_log(scenarios: &[PaymentScenario]) -> ProcessLog {
    let traces = scenarios
        .iter()
        .enumerate()
        .map(|(index, scenario)| {
            let payable = compute_payable(scenario);
            let sequence = sequence_for(scenario);
            let paying_task = if payable.terminated {
                None
            } else {
                // the last payment task of the sequence is where money arrived
                sequence
                    .iter()
                    .rev()
                    .find(|t| matches!(**t, "T2" | "T3" | "T4"))
                    .copied()
            };
            let events = sequence
                .iter()
                .enumerate()
                .map(|(position, task)| {
                    let mut attributes = Vec::new();
                    match *task {
                        "T1" => {
                            attributes.push(AttributeValue::number(
                                "invoiceValue",
                                scenario.principal,
                            ));
                            attributes.push(AttributeValue::date("invoiceDate", invoice_date()));
                        }
                        "T2" | "T3" | "T4" => {
                            attributes.push(AttributeValue::number(
                                "payInDays",
                                f64::from(scenario.pay_in_days),
                            ));
                            let fraction = if paying_task == Some(task) { 1.0 } else { 0.0 };
                            attributes.push(AttributeValue::number("paymentReceived", fraction));
                            if paying_task == Some(task) {
                                attributes
                                    .push(AttributeValue::number("interest", payable.interest));
                                attributes
                                    .push(AttributeValue::number("penalty", payable.penalty));
                            }
                        }
                        "T6" => {
                            attributes.push(AttributeValue::number(
                                "equipmentDeliveryDays",
                                f64::from(scenario.equipment_delivery_days),
                            ));
                        }
                        _ => {}
                    }
                    TaskEvent::new(*task, position, attributes)
                        .expect("fixture events are well-formed")
                })
                .collect();
            Trace::new(format!("trace-{}", index + 1), events)
                .expect("fixture traces are well-formed")
        })
        .collect();
    ProcessLog::new("payment-process", traces).expect("fixture trace ids are unique")
}

/// Draws scenarios with uniform parameters: payment day 1..=40, whole-dollar
/// principal 100..=1000, delivery 1..=10 days. Deterministic for a seed.
pub fn sample_scenarios(count: usize, seed: u64) -> Vec<PaymentScenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let principal = f64::from(rng.gen_range(100u32..=1000));
            let pay_in_days = rng.gen_range(1u32..=40);
            let delivery = rng.gen_range(1u32..=10);
            PaymentScenario::new(principal, pay_in_days, delivery)
        })
        .collect()
}
