from django.db import models
import uuid # Unique ids for runs referenced from record files


# Audit ledger of executed solver runs; the JSON record on disk is the primary artifact
class SolverRun(models.Model):
    METHOD_CHOICES = [
        ('sgd', 'Stochastic gradient descent'),
        ('gradient_descent', 'Gradient descent'),
        ('fixed_point', 'Fixed-point iteration'),
    ]

    run_id = models.CharField(max_length=100, unique=True, default=uuid.uuid4, editable=False)
    family = models.CharField(max_length=32)
    method = models.CharField(max_length=32, choices=METHOD_CHOICES, default='sgd')
    seed = models.BigIntegerField(null=True, blank=True)
    schedule = models.CharField(max_length=255)
    batch_size = models.CharField(max_length=255) # int or a JSON list of per-step sizes
    steps = models.IntegerField()
    final_F = models.FloatField(null=True, blank=True)
    final_grad_norm_sq = models.FloatField(null=True, blank=True)
    final_w2_reference = models.FloatField(null=True, blank=True)
    stop_reason = models.CharField(max_length=64)
    wall_time = models.FloatField()
    record_path = models.CharField(max_length=500, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    def __str__(self):
        return f"{self.method} on {self.family} (seed {self.seed}): {self.steps} steps, {self.stop_reason}"

    class Meta:
        ordering = ['-created_at']
        get_latest_by = 'created_at'
