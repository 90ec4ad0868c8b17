# Generated by Django 5.2.4 on 2026-10-19 09:12

import uuid
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='SolverRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('run_id', models.CharField(default=uuid.uuid4, editable=False, max_length=100, unique=True)),
                ('family', models.CharField(max_length=32)),
                ('method', models.CharField(choices=[('sgd', 'Stochastic gradient descent'), ('gradient_descent', 'Gradient descent'), ('fixed_point', 'Fixed-point iteration')], default='sgd', max_length=32)),
                ('seed', models.BigIntegerField(blank=True, null=True)),
                ('schedule', models.CharField(max_length=255)),
                ('batch_size', models.CharField(max_length=255)),
                ('steps', models.IntegerField()),
                ('final_F', models.FloatField(blank=True, null=True)),
                ('final_grad_norm_sq', models.FloatField(blank=True, null=True)),
                ('final_w2_reference', models.FloatField(blank=True, null=True)),
                ('stop_reason', models.CharField(max_length=64)),
                ('wall_time', models.FloatField()),
                ('record_path', models.CharField(blank=True, max_length=500)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
                'get_latest_by': 'created_at',
            },
        ),
    ]
