//! Renders one message of each kind and decodes the block back out of the
//! text.

use reveca::comms::render_message;
use reveca::geometry::Cell;
use reveca::map::Layout;
use reveca::message::{
    Answer, InitPayload, Payload, QueryPayload, Recipients, ResponsePayload, SubGoalPayload, MESSAGE_BUDGET,
};
use reveca::world::{AgentId, ObjectId};

fn main() {
    let layout = Layout::house();
    let kitchen = layout.room_by_name("kitchen").unwrap().room_id;
    let names = |id: ObjectId| match id.0 {
        300 => "cupcake".to_string(),
        104 => "coffeetable".to_string(),
        _ => format!("object {id}"),
    };
    let payloads = [
        Payload::Init(InitPayload { room: kitchen, position: Cell::new(10, 3), objects: Vec::new() }),
        Payload::Query(QueryPayload { room: kitchen, object_ids: vec![ObjectId(300)] }),
        Payload::Response(ResponsePayload {
            room: kitchen,
            object_ids: vec![ObjectId(300)],
            answer: Answer::Confirm,
            history: vec!["[gograb] <cupcake> (300)".into()],
        }),
        Payload::SubGoal(SubGoalPayload {
            room: kitchen,
            object_id: ObjectId(300),
            object_name: "cupcake".into(),
            location_id: ObjectId(104),
            location_name: "coffeetable".into(),
        }),
    ];
    for p in payloads {
        let m = render_message(p.clone(), AgentId(1), "Alice", Recipients::All, &layout, &names, None).expect("fits the budget");
        let back = m.payload_from_text().expect("block decodes");
        println!("{:?} ({}/{MESSAGE_BUDGET} chars)\n  {}\n  round trip: {}", m.kind, m.char_len(), m.text, back == p);
    }
}
