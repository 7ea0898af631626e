//! Splits free-form instructions into ordered sub-goals and directives with
//! the built-in rule reasoner.

use uavnav::navigator::{Instruction, RuleReasoner};

fn main() {
    let texts = [
        "Fly to the red house, then turn left at the water tower and land on the helipad.",
        "pass the bridge on the left, then go toward the antenna",
        "ascend, turn right, then move forward",
        "turn left, then move right, then go straight",
    ];
    for text in texts {
        let plan = RuleReasoner::parse(&Instruction::parse(text).expect("non-empty"));
        println!("{text}");
        for g in &plan.goals {
            println!("  goal      {:?} ({:?})", g.phrase, g.qualifier);
        }
        for d in &plan.directives {
            println!("  directive {d:?}");
        }
        println!("  stop      {}", plan.stop);
    }
}
