use std::fmt::Write as _;

use serde::Serialize;

use super::Population;
use crate::metrics::format_value;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub best_vector: Vec<f64>,
}

impl GenerationRecord {
    pub fn of(population: &Population) -> Self {
        let (best, best_fitness) = population.best();
        GenerationRecord {
            generation: population.generation,
            best_fitness,
            mean_fitness: population.mean_fitness(),
            best_vector: population.members[best].clone(),
        }
    }
}

/// Per-generation history of a run, generation 0 first.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Trajectory {
    pub records: Vec<GenerationRecord>,
}

impl Trajectory {
    pub fn push(&mut self, record: GenerationRecord) {
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&GenerationRecord> {
        self.records.last()
    }

    pub fn best_fitness(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.best_fitness).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("generation,best_fitness,mean_fitness\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{}",
                r.generation,
                format_value(r.best_fitness),
                format_value(r.mean_fitness)
            );
        }
        out
    }
}
