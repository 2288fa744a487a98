import pandas as pd
import streamlit as st
from utils.dashboard.handlers import evaluate_case, show_trace
from utils.evaluation.cases import DEFAULT_CASES
from utils.evaluation.exports import dispersion_table, histogram_table, scatter_table
from utils.evaluation.monte_carlo import PN_POLICY
from utils.page_config import set_custom_page_config
from utils.sidebar.navigation import navigate
from utils.sidebar.helper import selected_config_path

# Initialize session state variables
def initialize_session_state():
	if 'eval_results' not in st.session_state:
		st.session_state.eval_results = {}

# Inputs for one batch of cases; results accumulate per case label
def display_evaluation_inputs():
	col1, col2 = st.columns(2)
	with col1:
		use_pn = st.toggle("Proportional navigation baseline", value=False)
		checkpoint = st.text_input("Checkpoint path", disabled=use_pn, help="e.g. runs/desk/checkpoints/update_00150.ckpt")
		cases = st.multiselect("Cases", options=list(DEFAULT_CASES), default=["Optim"])
		extra = st.text_input("Other case labels (comma separated)", help="e.g. PV=10, Divert=25%")
	with col2:
		episodes = st.number_input("Episodes per case", min_value=1, max_value=100000, value=100, step=10)
		seed = st.number_input("Seed", min_value=0, value=0, step=1)
		stochastic = st.checkbox("Sample actions (stochastic policy)", value=False)
		ground_impact = st.checkbox("Fly every episode to ground impact", value=False)

	labels = cases + [label.strip() for label in extra.split(",") if label.strip()]
	if st.button("Run Evaluation", type="primary"):
		if not use_pn and not checkpoint:
			st.error("Enter a checkpoint path or evaluate the proportional-navigation baseline.")
			return
		if not labels:
			st.error("Pick at least one case.")
			return
		for label in labels:
			bar = st.progress(0.0, text=f"{label}...")
			success, message, result = evaluate_case(
				selected_config_path(),
				PN_POLICY if use_pn else "checkpoint",
				checkpoint or None,
				label, int(episodes), int(seed), stochastic, ground_impact,
				progress=lambda done, total, label=label: bar.progress(done / total, text=f"{label}: {done}/{total} episodes"),
			)
			bar.empty()
			if success:
				st.session_state.eval_results[result.summary.label] = result
				st.toast(message)
			else:
				st.error(message)

# Performance table across every evaluated case, then per-case detail tabs
def display_results():
	results = st.session_state.eval_results
	if not results:
		st.info("No cases evaluated yet.")
		return

	st.markdown("#### Performance")
	table = pd.DataFrame([r.summary.performance_row() for r in results.values()])
	st.dataframe(table.style.format(precision=2), use_container_width=True, hide_index=True)
	st.download_button("Download performance CSV", data=table.to_csv(index=False), file_name="performance.csv", mime="text/csv")

	tabs = st.tabs(list(results))
	for tab, (label, result) in zip(tabs, results.items()):
		with tab:
			display_case(label, result)

def display_case(label, result):
	summary = result.summary
	col1, col2, col3, col4 = st.columns(4)
	col1.metric("Episodes", summary.episodes)
	col2.metric("Time of flight (s)", f"{summary.tof_mean:.2f} ± {summary.tof_std:.2f}")
	col3.metric("Failures", summary.failures)
	col4.metric("Violation type", summary.violation_type)

	st.markdown("##### Constraint peaks")
	st.dataframe(summary.constraint_table(), use_container_width=True, hide_index=True)

	col1, col2 = st.columns(2)
	with col1:
		st.markdown("##### Terminal miss (downrange vs crossrange, m)")
		st.scatter_chart(scatter_table(result.records), x="downrange", y="crossrange")
	with col2:
		st.markdown("##### Target terminal position (m)")
		st.scatter_chart(dispersion_table(result.records), x="target_x", y="target_y")

	histograms = histogram_table(result.records)
	for quantity, rows in histograms.groupby("quantity"):
		st.markdown(f"##### {quantity.replace('_', ' ').capitalize()} histogram")
		st.bar_chart(rows.assign(bin=rows["bin_left"].round(2)).set_index("bin")["count"])

	for episode, trace in result.traces.items():
		with st.expander(f"Episode {episode} trajectory"):
			show_trace(trace)

	if st.button("Remove this case", key=f"remove_{label}"):
		del st.session_state.eval_results[label]
		st.rerun()

def main():
	set_custom_page_config(page_title="Monte Carlo Evaluation")
	navigate()
	initialize_session_state()
	display_evaluation_inputs()
	display_results()

if __name__ == "__main__":
	main()
