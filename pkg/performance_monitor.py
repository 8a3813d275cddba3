"""
Performance Monitoring
Samples process CPU and memory while a simulation runs, tracks the
simulation throughput and warns when the memory threshold is crossed
"""

import time
import psutil
import threading
import logging
from typing import Dict, Any, Callable
from collections import deque


class PerformanceMonitor:
    def __init__(self, max_memory_mb: float = 2048.0, interval: float = 1.0):
        self.cpu_usage_history = deque(maxlen=600)
        self.memory_usage_history = deque(maxlen=600)
        self.throughput_history = deque(maxlen=1000)

        self.max_memory_mb = float(max_memory_mb)
        self.interval = interval

        self.is_monitoring = False
        self.monitor_thread = None
        self.memory_warned = False
        self.started_at = None
        self.stopped_at = None

        self.performance_callbacks = []
        self._process = psutil.Process()
        self._lock = threading.Lock()
        self._stop_event = threading.Event()

    def __enter__(self):
        self.start_monitoring()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.stop_monitoring()
        return False

    def start_monitoring(self):
        """Start the background sampling thread"""
        if self.is_monitoring:
            return

        self.is_monitoring = True
        self._stop_event.clear()
        self.started_at = time.time()
        self.stopped_at = None
        self._process.cpu_percent(interval=None)
        self.monitor_thread = threading.Thread(target=self._monitoring_loop, daemon=True)
        self.monitor_thread.start()

        logging.debug("Performance monitoring started")

    def stop_monitoring(self):
        self.is_monitoring = False
        self._stop_event.set()

        if self.monitor_thread and self.monitor_thread.is_alive():
            self.monitor_thread.join(timeout=2.0 * self.interval + 1.0)
        self.sample()
        self._notify_performance_callbacks()
        self.stopped_at = time.time()

        logging.debug("Performance monitoring stopped")

    def _monitoring_loop(self):
        try:
            while self.is_monitoring:
                start_time = time.time()
                self.sample()
                self._notify_performance_callbacks()

                elapsed = time.time() - start_time
                self._stop_event.wait(max(0.0, self.interval - elapsed))

        except Exception as e:
            logging.error(f"Error in performance monitoring loop: {e}")

    def sample(self) -> Dict[str, float]:
        """Record one CPU and resident-memory reading"""
        try:
            cpu_percent = self._process.cpu_percent(interval=None)
            memory_mb = self._process.memory_info().rss / (1024 * 1024)
        except psutil.Error as e:
            logging.warning(f"Could not read process statistics: {e}")
            return {}

        with self._lock:
            self.cpu_usage_history.append(cpu_percent)
            self.memory_usage_history.append(memory_mb)
        self._check_memory_threshold(memory_mb)
        return {"cpu_percent": cpu_percent, "memory_mb": memory_mb}

    def _check_memory_threshold(self, memory_mb: float):
        if memory_mb > self.max_memory_mb and not self.memory_warned:
            logging.warning(f"High memory usage detected: {memory_mb:.1f}MB "
                            f"(threshold {self.max_memory_mb:.0f}MB)")
            self.memory_warned = True

    def update_throughput(self, steps_per_second: float):
        """Record simulated Euler steps per wall-clock second"""
        with self._lock:
            self.throughput_history.append(steps_per_second)

    def add_performance_callback(self, callback: Callable[[Dict[str, Any]], None]):
        """Call with get_current_performance_data() after every background sample"""
        self.performance_callbacks.append(callback)

    def _notify_performance_callbacks(self):
        performance_data = self.get_current_performance_data()

        for callback in self.performance_callbacks:
            try:
                callback(performance_data)
            except Exception as e:
                logging.error(f"Error in performance callback: {e}")

    def get_current_performance_data(self) -> Dict[str, Any]:
        with self._lock:
            return {
                "timestamp": time.time(),
                "cpu_percent": self.cpu_usage_history[-1] if self.cpu_usage_history else 0.0,
                "memory_mb": self.memory_usage_history[-1] if self.memory_usage_history else 0.0,
                "steps_per_second": self.throughput_history[-1] if self.throughput_history else 0.0,
            }

    def get_performance_summary(self) -> Dict[str, Any]:
        """Summary statistics over the monitored interval"""
        end = self.stopped_at if self.stopped_at is not None else time.time()
        summary = {
            "wall_seconds": (end - self.started_at) if self.started_at is not None else 0.0,
            "memory_threshold_mb": self.max_memory_mb,
            "memory_warning": self.memory_warned,
        }

        with self._lock:
            cpu_list = list(self.cpu_usage_history)
            memory_list = list(self.memory_usage_history)
            throughput_list = list(self.throughput_history)

        if cpu_list:
            summary["cpu"] = {
                "average": sum(cpu_list) / len(cpu_list),
                "max": max(cpu_list),
            }

        if memory_list:
            summary["memory"] = {
                "current_mb": memory_list[-1],
                "peak_mb": max(memory_list),
            }

        if throughput_list:
            summary["throughput"] = {
                "average_steps_per_second": sum(throughput_list) / len(throughput_list),
                "min_steps_per_second": min(throughput_list),
            }

        return summary
