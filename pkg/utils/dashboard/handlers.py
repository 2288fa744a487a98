import logging
from pathlib import Path

import pandas as pd
import streamlit as st

from utils.config.settings import dump_config, load_config
from utils.evaluation.cases import CASE_KINDS, DEFAULT_CASES, parse_case
from utils.evaluation.exports import relative_positions
from utils.evaluation.monte_carlo import PN_POLICY, make_agent, run_case, run_episode, snapshot_from_checkpoint
from utils.policy.checkpoint import checkpoint_info
from utils.training.trainer import METRIC_COLUMNS

logger = logging.getLogger(__name__)

# --------------------------------------------------------------------------
# Library calls wrapped as (success, message, payload)
# --------------------------------------------------------------------------

def load_run_config(config_path):
	logger.debug("load_run_config() called with: %s", config_path)
	try:
		return True, "Config is valid.", load_config(config_path)
	except ValueError as e:
		return False, str(e), None

@st.cache_data(show_spinner=False)
def cached_rollout(config_path, policy, checkpoint_path, seed, case_label):
	ok, message, config = load_run_config(config_path)
	if not ok:
		return False, message, None
	scenario = config.scenario
	try:
		if case_label:
			scenario = parse_case(case_label).apply(scenario)
		source = PN_POLICY if policy == PN_POLICY else snapshot_from_checkpoint(checkpoint_path)
		agent = make_agent(source, scenario, pn_gain=config.evaluation.pn_gain)
		info, trace = run_episode(scenario, agent, int(seed))
	except ValueError as e:
		return False, f"Rollout failed: {e}", None
	message = f"{info['reason']}: miss {info['miss']:.3f} m at {info['terminal_speed']:.1f} m/s after {info['time_of_flight']:.2f} s"
	return True, message, (info, trace)

# Not cached: the page keeps the result in session state and drives the progress bar
def evaluate_case(config_path, policy, checkpoint_path, case_label, episodes, seed, stochastic, ground_impact, progress=None):
	logger.debug("evaluate_case() called with: %s, %s episodes", case_label, episodes)
	ok, message, config = load_run_config(config_path)
	if not ok:
		return False, message, None
	try:
		case = parse_case(case_label)
		source = PN_POLICY if policy == PN_POLICY else snapshot_from_checkpoint(checkpoint_path)
		result = run_case(
			case, source, int(episodes), int(seed),
			scenario=config.scenario,
			stochastic=stochastic,
			ground_impact=ground_impact,
			workers=config.evaluation.workers,
			pn_gain=config.evaluation.pn_gain,
			trace_selection="first_divert" if case.kind in ("Divert", "Evasion") else "first",
			progress=progress,
		)
	except ValueError as e:
		return False, f"Evaluation failed: {e}", None
	return True, f"{case.label}: {episodes} episodes evaluated.", result

def load_metrics(run_dir):
	logger.debug("load_metrics() called with: %s", run_dir)
	path = Path(run_dir) / "metrics.csv"
	if not path.is_file():
		return False, f"No metrics.csv in {run_dir}", None
	metrics = pd.read_csv(path)
	missing = [c for c in ("Update", "Mean R", "SD R", "Min R") if c not in metrics.columns]
	if missing:
		return False, f"{path} is missing columns: {', '.join(missing)}", None
	return True, f"{len(metrics)} updates loaded.", metrics[[c for c in METRIC_COLUMNS if c in metrics.columns]]

def list_checkpoints(run_dir):
	logger.debug("list_checkpoints() called with: %s", run_dir)
	rows = []
	for path in sorted(Path(run_dir).glob("**/*.ckpt")):
		try:
			info = checkpoint_info(path)
		except ValueError as e:
			rows.append({"Checkpoint": str(path), "Update": None, "Policy LR": None, "Clip": None, "SHA-256": f"unreadable: {e}"})
			continue
		rows.append({
			"Checkpoint": str(path),
			"Update": info.get("update"),
			"Policy LR": info.get("policy_lr"),
			"Clip": info.get("clip_epsilon"),
			"SHA-256": info["sha256"][:16],
		})
	if not rows:
		return False, f"No checkpoints under {run_dir}", None
	return True, f"{len(rows)} checkpoint(s) found.", pd.DataFrame(rows)

# --------------------------------------------------------------------------
# Action Handlers (one function per button) for the home page
# --------------------------------------------------------------------------

# Validate the selected config and show it with every default made explicit.
def action_validate_config(config_path):
	logger.debug("action_validate_config() called")
	ok, message, config = load_run_config(config_path)
	if not ok:
		st.error(message)
		return
	st.success(message)
	st.code(dump_config(config), language="toml")

# One proportional-navigation episode on the selected scenario.
def action_pn_rollout(config_path):
	logger.debug("action_pn_rollout() called")
	ok, message, payload = cached_rollout(config_path, PN_POLICY, None, 0, None)
	if not ok:
		st.error(message)
		return
	info, trace = payload
	st.success(message)
	show_trace(trace)

# Case labels understood by the evaluation page and `cli.py eval --case`.
def action_case_labels():
	logger.debug("action_case_labels() called")
	rows = []
	for label in DEFAULT_CASES:
		case = parse_case(label)
		rows.append({"Label": label, "Kind": case.kind, "Overrides": ", ".join(f"{k}={v}" for k, v in case.overrides.items()) or "-"})
	st.markdown(f"Valid kinds: {', '.join(CASE_KINDS)}. Percentages may be written with or without `%`.")
	st.dataframe(pd.DataFrame(rows), use_container_width=True)

# --------------------------------------------------------------------------
# Shared renderers
# --------------------------------------------------------------------------

def show_trace(trace):
	st.markdown("#### Trajectory")
	st.dataframe(trace.drop(columns=["x_T", "y_T", "z_T"]), use_container_width=True)
	steps = trace[trace["event"] == ""].set_index("t")
	col1, col2, col3 = st.columns(3)
	with col1:
		st.markdown("###### Heating rate (W/m²)")
		st.line_chart(steps["qdot"])
	with col2:
		st.markdown("###### Dynamic pressure (Pa)")
		st.line_chart(steps["q"])
	with col3:
		st.markdown("###### Load (m/s²)")
		st.line_chart(steps["n"])
	events = trace[trace["event"].str.startswith(("divert", "terminal"))]
	if not events.empty:
		st.markdown("#### Events")
		st.dataframe(events[["t", "r", "V", "event"]], use_container_width=True)
	st.markdown("#### Relative position")
	st.line_chart(relative_positions(trace).set_index("t")[["dx", "dy", "dz"]])
