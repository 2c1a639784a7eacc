"""Minimal /embed service backed by sentence-transformers.

    python scripts/embed_server.py --model sentence-transformers/all-mpnet-base-v2 --port 8000
    EMBED_ENDPOINT=http://127.0.0.1:8000 semscore score --provider http ...
"""

import argparse
import json
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from sentence_transformers import SentenceTransformer


def make_handler(model, name):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def reply(self, status, payload):
            body = json.dumps(payload).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_POST(self):
            if self.path.rstrip("/") != "/embed":
                return self.reply(404, {"error": f"no route {self.path}"})
            try:
                req = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                texts = req["texts"]
            except (KeyError, TypeError, ValueError) as e:
                return self.reply(400, {"error": f"bad request: {e}"})
            if req.get("model") and req["model"] not in (name, name.split("/")[-1]):
                return self.reply(422, {"error": f"this service runs {name}, not {req['model']}"})
            dim = model.get_sentence_embedding_dimension()
            if req.get("level", "sentence") == "token":
                out = model.encode(texts, output_value="token_embeddings", convert_to_numpy=False)
                return self.reply(200, {"dim": dim, "token_vectors": [t.tolist() for t in out]})
            out = model.encode(texts, normalize_embeddings=True)
            return self.reply(200, {"dim": dim, "vectors": out.tolist()})

        def log_message(self, *args):
            pass

    return Handler


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--model", default="sentence-transformers/all-mpnet-base-v2")
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=8000)
    args = ap.parse_args()
    model = SentenceTransformer(args.model)
    ThreadingHTTPServer((args.host, args.port), make_handler(model, args.model)).serve_forever()


if __name__ == "__main__":
    main()
