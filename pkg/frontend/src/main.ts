import { LabelerApp } from "./app.js";
import { webSocketTransport } from "./protocol.js";

const root = document.getElementById("app");
if (root) {
  new LabelerApp(root, webSocketTransport);
}
