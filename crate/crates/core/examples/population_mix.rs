//! Vulnerability groups from five independent attributes, and the per-group
//! arrival rates they imply.
//!
//! cargo run --example population_mix

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shelterq::population::{
    class_arrival_rates, group_by_rule_order, group_of, group_shares, sample_profile, AttributeModel, CombinationTable,
    Group, GroupingMode,
};

fn main() {
    let model = AttributeModel::default();
    let exact = group_shares(&model, GroupingMode::CombinationTable);
    let rule = group_shares(&model, GroupingMode::RuleOrder);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draws = 200_000;
    let mut counts = [0usize; 6];
    for _ in 0..draws {
        counts[sample_profile(&model, &mut rng).group.index()] += 1;
    }

    let mix = class_arrival_rates(4.44, &model);
    println!("group  table   rule-order  sampled   lambda_j");
    for g in Group::ALL {
        let i = g.index();
        println!(
            "{:>5}  {:>6.2}%  {:>9.2}%  {:>6.2}%  {:>8.4}",
            g,
            100.0 * exact[i],
            100.0 * rule[i],
            100.0 * counts[i] as f64 / draws as f64,
            mix.rates[i]
        );
    }

    println!("\ncombinations where the table and the rule chain disagree:");
    for row in CombinationTable::builtin().rows() {
        let by_rule = group_by_rule_order(row.attributes);
        if by_rule != group_of(row.attributes) {
            println!("  {:?}: table {}, rule order {}", row.attributes, row.group, by_rule);
        }
    }
}
