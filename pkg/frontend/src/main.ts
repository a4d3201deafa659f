import { SessionApi } from "./api.js";
import { SessionApp } from "./app.js";

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app mount point");
}
new SessionApp(root, new SessionApi()).start();
