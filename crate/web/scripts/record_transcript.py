"""Record a scripted trial from a running conduct service together with the
CLI's `decide` output for every prefix of the log.

    combodose-conduct --addr 127.0.0.1:18080 &
    python3 scripts/record_transcript.py http://127.0.0.1:18080 ../target/debug/combodose > test/fixtures/transcript.json
"""

import json
import subprocess
import sys
import urllib.request

SCRIPTS = {
    "cboin": [0, 0, 1, 0, 2, 1, 0, 1],
    "pocrm": [0, 0, 0, 1, 1, 0, 2, 0],
}


def call(base, method, path, body=None):
    data = None if body is None else json.dumps(body).encode()
    req = urllib.request.Request(base + path, data=data, method=method, headers={"content-type": "application/json"})
    with urllib.request.urlopen(req) as resp:
        return json.load(resp)


def decide(cli, history):
    out = subprocess.run(
        [cli, "decide", "--history", "-", "--format", "json"],
        input=json.dumps(history).encode(),
        check=True,
        capture_output=True,
    )
    return json.loads(out.stdout)


def main():
    base, cli = sys.argv[1], sys.argv[2]
    trials = []
    for design, dlts in SCRIPTS.items():
        view = call(base, "POST", "/api/trials", {"design": {"id": design}, "grid": {"J": 5, "K": 3}, "config": {"seed": 2024}})
        steps = [{"view": view, "decide": decide(cli, view["history"])}]
        for y in dlts:
            if view["terminated"]:
                break
            dose = view["recommendation"]["decision"]["action"]["dose"]
            cohort = {"dose": dose, "patients": 3, "dlts": y}
            view = call(base, "POST", f"/api/trials/{view['id']}/cohorts", cohort)
            steps.append({"view": view, "decide": decide(cli, view["history"])})
        trials.append({"design": design, "steps": steps})
    json.dump({"trials": trials}, sys.stdout, indent=1)


if __name__ == "__main__":
    main()
