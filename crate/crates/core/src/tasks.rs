//! Synthetic task generators.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::normalize_answer;
use crate::debate::Task;
use crate::rng::{stream, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskDomain {
    /// Four-option multiple choice with labels A to D.
    Mcq,
    /// Integer arithmetic with numeric options.
    Math,
}

impl TaskDomain {
    pub fn as_str(&self) -> &'static str {
        match self {
            TaskDomain::Mcq => "mcq",
            TaskDomain::Math => "math",
        }
    }
}

pub fn generate_tasks(domain: TaskDomain, n: usize, seed: u64) -> Vec<Task> {
    let mut rng = stream_rng(seed, stream::TASKS + domain as u64);
    (0..n)
        .map(|i| match domain {
            TaskDomain::Mcq => {
                let options: Vec<String> = ["A", "B", "C", "D"].iter().map(|s| s.to_string()).collect();
                let truth = options[rng.random_range(0..options.len())].clone();
                Task::new(format!("mcq question {i}"), options, truth, "mcq").expect("valid mcq task")
            }
            TaskDomain::Math => {
                let a: i64 = rng.random_range(2..50);
                let b: i64 = rng.random_range(2..20);
                let (op, expr) = match rng.random_range(0..3) {
                    0 => ('+', a + b),
                    1 => ('-', a - b),
                    _ => ('*', a * b),
                };
                let truth = normalize_answer(&expr.to_string()).expect("integer normalizes");
                let mut options = vec![truth.clone()];
                for d in [1, -1, 2, 10] {
                    if options.len() == 4 {
                        break;
                    }
                    let v = (expr + d).to_string();
                    if !options.contains(&v) {
                        options.push(v);
                    }
                }
                options.shuffle(&mut rng);
                Task::new(format!("compute {a} {op} {b}"), options, truth, "math").expect("valid math task")
            }
        })
        .collect()
}
