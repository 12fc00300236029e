from django.db import models


class ExperimentRun(models.Model):
    """
    One invocation of a harness command, with its configuration echo and headline metrics
    """
    KIND_CHOICES = (
        ('synth', 'Synthetic corpus'),
        ('partition', 'Partition'),
        ('train', 'Policy training'),
        ('rollout', 'Test-time rollout'),
        ('baseline', 'Baseline'),
        ('robustness', 'Robustness'),
        ('eval', 'Evaluation'),
    )

    kind = models.CharField(max_length=20, choices=KIND_CHOICES)
    seed = models.IntegerField(null=True, blank=True)
    config = models.JSONField(default=dict, help_text="Configuration the run was started with")
    run_dir = models.CharField(max_length=500, blank=True)
    beta = models.FloatField(null=True, blank=True, help_text="Ensemble weight fitted after the rollout")
    metrics = models.JSONField(default=dict, help_text="Headline metrics (precision, recall, f1, error rate)")
    wall_clock_seconds = models.FloatField(default=0.0)
    created_at = models.DateTimeField(auto_now_add=True)

    def __str__(self):
        return f"{self.kind} run {self.id} (seed {self.seed})"

    class Meta:
        ordering = ['-created_at']
        indexes = [
            models.Index(fields=['kind'], name='harness_run_kind_idx'),
            models.Index(fields=['created_at'], name='harness_run_created_idx'),
        ]


class StepRecord(models.Model):
    """A training transition or a rollout step of a run"""
    run = models.ForeignKey(ExperimentRun, on_delete=models.CASCADE, related_name='steps')
    episode = models.IntegerField(default=0)
    step = models.IntegerField()
    action = models.IntegerField()
    epsilon = models.FloatField(null=True, blank=True)
    reward = models.FloatField(null=True, blank=True)
    loss = models.FloatField(null=True, blank=True)
    target = models.FloatField(null=True, blank=True)
    acc_c1 = models.FloatField(null=True, blank=True)
    acc_c2 = models.FloatField(null=True, blank=True)
    acc_ensemble = models.FloatField(null=True, blank=True)

    def __str__(self):
        return f"Run {self.run_id} episode {self.episode} step {self.step}: subset {self.action}"

    class Meta:
        ordering = ['run', 'episode', 'step']


class ReplicaResult(models.Model):
    """Metric of one robustness replica"""
    run = models.ForeignKey(ExperimentRun, on_delete=models.CASCADE, related_name='replicas')
    replica = models.IntegerField()
    seed = models.IntegerField()
    metric = models.CharField(max_length=30)
    value = models.FloatField()
    beta = models.FloatField(null=True, blank=True)

    def __str__(self):
        return f"Replica {self.replica} of run {self.run_id}: {self.metric}={self.value:.4f}"

    class Meta:
        ordering = ['run', 'replica']
