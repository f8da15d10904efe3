"""plots CLI: threshold | decay | bootstrap figure rendering."""

import argparse
import sys

from .figures import SchemaError, plot_bootstrap, plot_decay, plot_threshold


def main(argv=None):
    ap = argparse.ArgumentParser(prog="plots",
                                 description="Render figures from couette-lab artifacts")
    sub = ap.add_subparsers(dest="kind", required=True)

    p = sub.add_parser("threshold", help="log-log threshold scatter with gamma fit")
    p.add_argument("--in", dest="inputs", required=True, nargs=1,
                   metavar="CAMPAIGN_JSON")
    p.add_argument("--out", required=True)

    p = sub.add_parser("decay", help="norm decay curves with fitted envelopes")
    p.add_argument("--in", dest="inputs", required=True, nargs=2,
                   metavar=("DECAY_CSV", "FIT_JSON"))
    p.add_argument("--out", required=True)

    p = sub.add_parser("bootstrap", help="bootstrap-ratio panels")
    p.add_argument("--in", dest="inputs", required=True, nargs="+",
                   metavar="RATIOS_JSON")
    p.add_argument("--out", required=True)

    args = ap.parse_args(argv)
    try:
        if args.kind == "threshold":
            info = plot_threshold(args.inputs[0], args.out)
            print(info["caption"])
        elif args.kind == "decay":
            info = plot_decay(args.inputs[0], args.inputs[1], args.out)
            print(f"decay figure at nu={info['nu']:g} -> {args.out}")
        else:
            info = plot_bootstrap(args.inputs, args.out)
            print(f"bootstrap panel with {len(info['ids'])} ratios -> {args.out}")
    except (SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
