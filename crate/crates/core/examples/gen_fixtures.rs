//! Regenerates the bundled fixture files under `data/`.
//!
//! ```text
//! cargo run -p scriptprobe --example gen_fixtures
//! ```
//!
//! Outputs are deterministic; rerunning must leave the files unchanged
//! (the acceptance suite checks this for the synthetic corpora).

use std::fs;
use std::path::PathBuf;

use scriptprobe::corpus::synth::{synthetic_corpus, SynthConfig};

/// Everyday activity chains with unambiguous step order; every ordered
/// pair within a chain is an (earlier, later) fixture row.
const CHAINS: &[&[&str]] = &[
    &["wake up", "get out of bed", "brush your teeth", "get dressed", "eat breakfast", "leave the house"],
    &["fill the kettle", "boil the water", "pour water into the cup", "steep the tea", "drink the tea"],
    &["preheat the oven", "mix the batter", "pour batter into the pan", "bake the cake", "let the cake cool", "eat a slice"],
    &["gather dirty clothes", "load the washing machine", "add detergent", "run the wash cycle", "move clothes to the dryer", "fold the clean clothes"],
    &["write a shopping list", "drive to the store", "fill the cart", "pay at the register", "carry groceries home", "put groceries away"],
    &["book a flight", "pack a suitcase", "travel to the airport", "check in for the flight", "board the plane", "land at the destination"],
    &["plant the seeds", "water the soil", "watch the sprouts appear", "harvest the vegetables"],
    &["open the laptop", "write the report", "proofread the report", "send the report", "receive a reply"],
    &["enter the restaurant", "read the menu", "order the meal", "eat the meal", "pay the bill", "leave the restaurant"],
    &["pick up the phone", "dial the number", "wait for an answer", "have the conversation", "hang up"],
    &["put on running shoes", "stretch your legs", "run five kilometers", "cool down", "take a shower"],
    &["find a recipe", "chop the vegetables", "heat the pan", "cook the stir fry", "serve dinner", "wash the dishes"],
    &["buy a ticket", "wait on the platform", "board the train", "ride to the city", "exit at the station"],
    &["draft the essay", "revise the draft", "format the citations", "submit the essay", "get the grade"],
    &["wet your hair", "apply shampoo", "rinse the shampoo", "towel dry", "comb your hair"],
    &["take out the trash bag", "tie the bag", "carry it outside", "drop it in the bin", "replace the liner"],
    &["study the textbook", "take practice tests", "sit the exam", "receive the results", "celebrate passing"],
    &["apply for the job", "interview with the manager", "receive the offer", "sign the contract", "start the new job"],
    &["set up the tent", "roll out the sleeping bags", "light the campfire", "cook dinner over the fire", "put out the fire", "go to sleep"],
    &["sand the wood", "apply the primer", "paint the first coat", "let it dry", "paint the second coat"],
    &["download the installer", "run the setup", "accept the license", "finish the installation", "launch the program"],
    &["knead the dough", "let the dough rise", "shape the loaf", "bake the bread", "slice the bread"],
    &["fill the tub", "test the water temperature", "bathe the baby", "dry the baby", "dress the baby"],
    &["receive the package", "cut the tape", "open the box", "remove the item", "recycle the cardboard"],
    &["turn on the projector", "open the slides", "present the findings", "answer questions", "thank the audience"],
];

fn main() -> std::io::Result<()> {
    let data_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data");
    fs::create_dir_all(&data_dir)?;

    // 20 target scenarios plus enough extra scenarios to supply a
    // 200-event foreign pool, generated in one call so all texts are
    // globally distinct.
    let full = synthetic_corpus(&SynthConfig {
        n_scenarios: 64,
        min_events: 3,
        max_events: 8,
        seed: 826,
    });
    let targets =
        scriptprobe::corpus::ScriptCorpus::new(full.scenarios()[..20].to_vec()).unwrap();
    targets.save(data_dir.join("acceptance_corpus.jsonl")).unwrap();

    let mut foreign = Vec::new();
    for scenario in &full.scenarios()[20..] {
        for script in &scenario.scripts {
            for e in script.events() {
                foreign.push(e.text().to_string());
            }
        }
    }
    assert!(foreign.len() >= 200, "only {} foreign events generated", foreign.len());
    foreign.truncate(200);
    let mut pool = String::new();
    for text in &foreign {
        pool.push_str(&serde_json::to_string(&serde_json::json!({ "text": text })).unwrap());
        pool.push('\n');
    }
    fs::write(data_dir.join("acceptance_foreign_pool.jsonl"), pool)?;

    // standalone demo corpus for the CLI walkthrough (split 30/10/20)
    let demo = synthetic_corpus(&SynthConfig {
        n_scenarios: 60,
        min_events: 3,
        max_events: 8,
        seed: 412,
    });
    demo.save(data_dir.join("demo_corpus.jsonl")).unwrap();

    // 200 unambiguous everyday orderings for the real-backend smoke run
    let mut pairs = Vec::new();
    for chain in CHAINS {
        for i in 0..chain.len() {
            for j in i + 1..chain.len() {
                pairs.push((chain[i], chain[j]));
            }
        }
    }
    assert!(pairs.len() >= 200, "only {} pairs available", pairs.len());
    pairs.truncate(200);
    let mut out = String::new();
    for (earlier, later) in &pairs {
        out.push_str(
            &serde_json::to_string(&serde_json::json!({ "earlier": earlier, "later": later }))
                .unwrap(),
        );
        out.push('\n');
    }
    fs::write(data_dir.join("temporal_pairs_200.jsonl"), out)?;

    println!(
        "wrote acceptance corpus (20 scenarios), foreign pool ({} events), \
         demo corpus (60 scenarios), temporal pairs ({})",
        foreign.len(),
        pairs.len()
    );
    Ok(())
}
