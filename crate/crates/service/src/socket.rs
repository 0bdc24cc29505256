//! Per-session socket channel. Text messages carry JSON requests and replies; frames come
//! back as binary packets (see `wire`). Requests are handled strictly in arrival order.

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::response::Response;
use serde::{Deserialize, Serialize};

use crate::api::{blocking, frame_packet, AppState};
use crate::engine::PickOutcome;
use crate::error::{ServiceError, ServiceResult};
use crate::session::{SessionView, StatePatch};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ClientMessage {
    State,
    Patch { patch: Box<StatePatch> },
    Frame { w: u32, h: u32 },
    Pick { px: f64, py: f64 },
    MapPoint { px: f64, py: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ServerMessage {
    State { session: SessionView },
    Pick { result: PickOutcome },
    MapPoint { point: Option<[f64; 2]> },
    Error { message: String },
}

pub(crate) async fn upgrade(
    ws: WebSocketUpgrade,
    State(engine): State<AppState>,
    Path(id): Path<String>,
) -> ServiceResult<Response> {
    engine.session(&id)?;
    Ok(ws.on_upgrade(move |socket| serve(socket, engine, id)))
}

async fn serve(mut socket: WebSocket, engine: AppState, id: String) {
    while let Some(Ok(msg)) = socket.recv().await {
        let reply = match msg {
            Message::Text(text) => handle(&engine, &id, text.as_str()).await,
            Message::Binary(_) => Err(ServiceError::BadRequest("binary requests are not supported".into())),
            Message::Close(_) => break,
            _ => continue,
        };
        let out = match reply {
            Ok(m) => m,
            Err(e) => text(&ServerMessage::Error { message: e.to_string() }),
        };
        if socket.send(out).await.is_err() {
            break;
        }
    }
}

fn text(m: &ServerMessage) -> Message {
    Message::Text(serde_json::to_string(m).expect("server messages serialize").into())
}

async fn handle(engine: &AppState, id: &str, raw: &str) -> ServiceResult<Message> {
    let req: ClientMessage = serde_json::from_str(raw).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
    let (engine, id) = (engine.clone(), id.to_owned());
    Ok(match req {
        ClientMessage::State => text(&ServerMessage::State { session: engine.session(&id)?.view() }),
        ClientMessage::Patch { patch } => text(&ServerMessage::State { session: engine.update_state(&id, &patch)? }),
        ClientMessage::Frame { w, h } => {
            let frame = blocking(move || engine.frame(&id, w, h)).await?;
            Message::Binary(frame_packet(&frame)?.into())
        }
        ClientMessage::Pick { px, py } => {
            let result = blocking(move || engine.pick(&id, px, py)).await?;
            text(&ServerMessage::Pick { result })
        }
        ClientMessage::MapPoint { px, py } => text(&ServerMessage::MapPoint { point: engine.map_point(&id, px, py)? }),
    })
}
