#!/usr/bin/env python
"""
PyEnclose - Command-Line Interface

This command-line tool runs one stage of the barrier pipeline (eigenpairs,
torsion functions, barrier construction, certification, the enclosed system
solve, the uniqueness experiment or the boundedness ladder) for a run
configuration file, and writes a manifest plus CSV fields to a run directory.
The 'report' subcommand reloads a run directory and emits plot data.

COPYRIGHT: 2020-2026, University Corporation for Atmospheric Research
LICENSE: See the LICENSE.rst file for details
"""

import os
import sys
from argparse import ArgumentParser, ArgumentTypeError
from warnings import simplefilter

from asaptools.simplecomm import create_comm

from pyenclose.errors import CertificateWarning, ConfigurationError
from pyenclose.pipeline import (
    EXIT_CERTIFICATE,
    EXIT_CONFIG,
    EXIT_OK,
    SUBCOMMANDS,
    RunManifest,
    emit_plot_data,
    read_config,
    run,
    summarize,
)


def seed(arg):
    try:
        value = int(arg)
    except ValueError:
        raise ArgumentTypeError("Seed must be an integer, got {!r}".format(arg))
    if not 0 <= value < 2 ** 64:
        raise ArgumentTypeError("Seed must be an unsigned 64-bit integer")
    return value


def thread_cap(environ=None):
    """
    Worker cap from the LE_THREADS environment variable (None if unset)
    """
    environ = os.environ if environ is None else environ
    value = environ.get("LE_THREADS")
    if value is None or value.strip() == "":
        return None
    try:
        return max(1, int(value))
    except ValueError:
        raise ConfigurationError("LE_THREADS must be an integer, got {!r}".format(value))


def cli(argv=None):
    desc = """This is the PyEnclose command-line tool.  It runs one subcommand
              of the barrier pipeline for a run configuration file."""

    parser = ArgumentParser(prog="enclose", description=desc)
    parser.add_argument(
        "subcommand",
        choices=SUBCOMMANDS,
        help="The pipeline stage to run, or 'report' to summarize a run directory",
    )
    parser.add_argument(
        "-c",
        "--config",
        default=None,
        metavar="CONFIG",
        type=str,
        help="Run configuration file in 'key = value' format [REQUIRED unless 'report']",
    )
    parser.add_argument(
        "-o",
        "--out",
        default=None,
        metavar="DIR",
        type=str,
        help="Run directory [Default: the 'output' key of the configuration]",
    )
    parser.add_argument(
        "--seed",
        default=None,
        type=seed,
        help=(
            "Seed of the random positive initial iterate of the Dirichlet eigen "
            "solver [Default: start from the distance function]"
        ),
    )
    parser.add_argument(
        "-e",
        "--error",
        default=False,
        action="store_true",
        help=(
            "Whether to error when a certificate component does not pass (True) "
            "or simply print a warning message (False) [Default: False]"
        ),
    )
    parser.add_argument(
        "-q",
        "--quiet",
        default=False,
        action="store_true",
        help="Whether to suppress warning messages [Default: False]",
    )
    parser.add_argument(
        "-s",
        "--serial",
        default=False,
        action="store_true",
        help=(
            "Whether to run in serial (True) or let LE_THREADS > 1 request "
            "parallel ranks (False). [Default: False]"
        ),
    )
    parser.add_argument(
        "-w",
        "--which",
        default="all",
        metavar="FIELD",
        type=str,
        help="Field to emit plot data for with 'report' [Default: all]",
    )

    return parser.parse_args(argv)


def report(outdir, which="all"):
    """
    Print the summary of a run directory and emit its plot data
    """
    manifest = RunManifest.load(outdir)
    for line in summarize(manifest):
        print(line)
    written = emit_plot_data(manifest, which, outdir)
    print("Wrote {} plot data files to {}".format(len(written), outdir))
    return EXIT_OK


def main(argv=None):
    args = cli(argv)

    if args.quiet:
        simplefilter("ignore")
    if args.error:
        simplefilter("error", CertificateWarning)

    if args.subcommand == "report":
        if args.out is None:
            print("The report subcommand needs --out", file=sys.stderr)
            return EXIT_CONFIG
        try:
            return report(args.out, args.which)
        except (IOError, OSError, ValueError, KeyError) as err:
            print("Cannot report on {!r}: {}".format(args.out, err), file=sys.stderr)
            return EXIT_CERTIFICATE

    if args.config is None:
        print("The {} subcommand needs --config".format(args.subcommand), file=sys.stderr)
        return EXIT_CONFIG
    try:
        threads = thread_cap()
        print("Reading run configuration file: {}".format(args.config))
        config = read_config(args.config)
    except (IOError, OSError) as err:
        print("Cannot read configuration file: {}".format(err), file=sys.stderr)
        return EXIT_CONFIG
    except ConfigurationError as err:
        print("Invalid configuration: {}".format(err), file=sys.stderr)
        return EXIT_CONFIG

    # Create the necessary SimpleComm
    serial = args.serial or threads is None or threads <= 1
    scomm = create_comm(serial=serial)

    manifest = run(
        config,
        args.subcommand,
        outdir=args.out,
        seed=args.seed,
        scomm=scomm,
        threads=None if serial else threads,
    )
    code = scomm.allreduce(manifest.exit_status or EXIT_OK, op="max")
    if scomm.is_manager():
        for err in manifest["errors"]:
            print("Error: {}".format(err), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
