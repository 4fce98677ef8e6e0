import { ConsoleSession } from "./session.js";
import { ConsoleUi } from "./ui.js";

const gateway = `${location.protocol}//${location.host}`;

const session = new ConsoleSession({
  gateway,
  onChange: (state) => ui.render(state),
});
const ui = new ConsoleUi(session);

session.connect();
void session.roster().catch(() => {
  // banner shows the failure; reconnect button retries
});
ui.render(session.state);
